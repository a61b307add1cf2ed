"""Named states, the protocol registry and the audit registry."""
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nonlocal_lab import audits, bell, config, protocols, statevec, stator, vaidman
from nonlocal_lab.bell import BellKind, EbitPool
from nonlocal_lab.branching import enumerate_branches, outcome_distribution
from nonlocal_lab.engine import ProtocolResult
from nonlocal_lab.errors import UsageError
from nonlocal_lab.statevec import Ket, Operator

# Topics
CORRELATED_METERS = 'correlated meters'
STATE_VERIFICATION = 'state verification'
STATOR = 'stator'
PARTIAL_TELEPORTATION = 'partial teleportation'
CAUSALITY_AUDIT = 'causality audit'

FAILURE = 'failure'

_BELL_NAMES: Dict[str, BellKind] = {
    'psi_minus': BellKind.PSI_MINUS,
    'psi_plus': BellKind.PSI_PLUS,
    'phi_minus': BellKind.PHI_MINUS,
    'phi_plus': BellKind.PHI_PLUS,
}

# |Psi_1> .. |Psi_4>: the two aligned states first, then the two anti-aligned ones.
_BASIS_STATES: Dict[int, Tuple[int, int]] = {1: (0, 0), 2: (1, 1), 3: (0, 1), 4: (1, 0)}

_SPIN_CHARS: Dict[str, np.ndarray] = {
    'u': statevec.UP,
    'd': statevec.DOWN,
    '+': np.array([1, 1]) / np.sqrt(2),
    '-': np.array([1, -1]) / np.sqrt(2),
}


@dataclass
class NamedState:
    spec: str
    ket: Ket
    alpha: Optional[float] = None


def parse_angle(text: str) -> float:
    if text.startswith('pi/'):
        return float(np.pi / int(text[3:]))
    return float(text)


def _parse_amplitudes(dims_text: Optional[str], body: str) -> Ket:
    amps = []
    for entry in body.strip().strip('[]').split(';'):
        parts = [p.strip() for p in entry.split(',') if p.strip()]
        if not 1 <= len(parts) <= 2:
            raise UsageError(f"malformed amplitude '{entry}': expected re or re,im")
        try:
            amps.append(complex(float(parts[0]), float(parts[1]) if len(parts) == 2 else 0.0))
        except ValueError:
            raise UsageError(f"malformed amplitude '{entry}'") from None
    if dims_text:
        dims = [int(d) for d in dims_text.split('x')]
    else:
        qubits = int(round(np.log2(len(amps)))) if amps else 0
        if len(amps) < 2 or 2 ** qubits != len(amps):
            raise UsageError(f"{len(amps)} amplitudes are not a qubit register; give dims as amps[AxB]:...")
        dims = [2] * qubits
    return Ket.from_amplitudes(amps, dims)


def parse_state(spec: str) -> NamedState:
    """Resolve a state spec: a Bell name, basis_n, twisted_n[@alpha], canonical(K,M), product(...) or amps."""
    text = spec.strip()
    if text in _BELL_NAMES:
        return NamedState(text, bell.make_bell(_BELL_NAMES[text]))
    match = config.BASIS_STATE_PATTERN.fullmatch(text)
    if match:
        return NamedState(text, statevec.basis_ket((2, 2), _BASIS_STATES[int(match['index'])]))
    match = config.TWISTED_STATE_PATTERN.fullmatch(text)
    if match:
        alpha = parse_angle(match['alpha']) if match['alpha'] else np.pi / 2
        return NamedState(text, stator.twisted_basis(alpha)[int(match['index']) - 1], alpha)
    match = config.CANONICAL_STATE_PATTERN.fullmatch(text)
    if match:
        K, M = int(match['K']), int(match['M'])
        if K < 2 or M < 2:
            raise UsageError("canonical(K,M) needs K >= 2 and M >= 2")
        if K ** M > config.MAX_TOTAL_DIM:
            raise UsageError(f"canonical({K},{M}) exceeds {config.MAX_TOTAL_DIM} amplitudes")
        amps = np.zeros((K,) * M, dtype=complex)
        for i in range(K):
            amps[(i,) * M] = 1.0
        return NamedState(text, Ket((K,) * M, amps.reshape(-1) / np.sqrt(K)))
    match = config.PRODUCT_STATE_PATTERN.fullmatch(text)
    if match:
        factors = [Ket((2,), _SPIN_CHARS[c]) for c in match['spins']]
        return NamedState(text, statevec.tensor_all(factors))
    match = config.AMPLITUDE_STATE_PATTERN.fullmatch(text)
    if match:
        return NamedState(text, _parse_amplitudes(match['dims'], match['body']))
    raise UsageError(f"unknown state '{spec}'; see `run.py catalog` for the named states")


# Observables for the partial-teleportation protocols

def _diagonal(values: Sequence[float], basis: np.ndarray, qubits: int) -> Operator:
    return statevec.hermitian_from_spectrum((2,) * qubits, basis, values)


def _ghz_basis(qubits: int) -> np.ndarray:
    """(|x> +- |~x>)/sqrt(2) for every x with a leading 0."""
    side = 2 ** qubits
    columns = []
    for x in range(side // 2):
        for sign in (1, -1):
            v = np.zeros(side, dtype=complex)
            v[x], v[side - 1 - x] = 1, sign
            columns.append(v / np.sqrt(2))
    return np.array(columns).T


def vaidman_observable(name: str, qubits: int, alpha: float = np.pi / 2) -> Tuple[Operator, Optional[np.ndarray]]:
    """An observable on `qubits` qubits and the eigenbasis to hand the protocol, if one is needed."""
    side = 2 ** qubits
    levels = np.arange(1, side + 1, dtype=float)
    if name == 'twisted':
        if qubits != 2:
            raise UsageError("the twisted observable lives on two qubits")
        basis = np.array([v.amps for v in stator.twisted_basis(alpha)]).T
        return _diagonal(levels, basis, qubits), None
    if name == 'ghz':
        return _diagonal(levels, _ghz_basis(qubits), qubits), None
    if name == 'product':
        return _diagonal(levels, np.eye(side, dtype=complex), qubits), None
    if name == 'sigma_z_a':
        O = statevec.embed(statevec.pauli('z'), [0], (2,) * qubits)
        return Operator(O.dims, O.mat, statevec.HERMITIAN), np.eye(side, dtype=complex)
    if name == 'identity':
        return Operator.identity((2,) * qubits), None
    raise UsageError(f"unknown observable '{name}'; choose from {VAIDMAN_OBSERVABLES}")


VAIDMAN_OBSERVABLES: List[str] = ['twisted', 'ghz', 'product', 'sigma_z_a', 'identity']


@dataclass
class RunOptions:
    max_rounds: int = config.DEFAULT_MAX_ROUNDS
    alpha: Optional[float] = None
    observable: Optional[str] = None


Runner = Callable[[Ket, Any, RunOptions], ProtocolResult]


@dataclass
class ProtocolEntry:
    name: str
    topic: str
    description: str
    default_state: str
    run: Runner
    marginalize: Tuple[str, ...] = ('dial',)
    exact: Optional[Callable[[Ket, RunOptions], Dict[str, float]]] = None

    def exact_distribution(self, psi: Ket, options: RunOptions) -> Dict[str, float]:
        """Outcome key -> probability, by branch enumeration unless a closed form is registered."""
        if self.exact is not None:
            return self.exact(psi, options)
        branches = enumerate_branches(lambda chooser: self.run(psi, chooser, options), self.marginalize)
        return outcome_distribution(branches, outcome_key)


@dataclass
class AuditEntry:
    name: str
    description: str
    run: Callable[..., audits.AuditOutput]
    options: List[str] = field(default_factory=list)
    topic: str = CAUSALITY_AUDIT


def outcome_key(result: ProtocolResult) -> str:
    return FAILURE if not result.success else format_value(result.inferred_value)


def format_value(value: Any) -> str:
    if value is None:
        return FAILURE
    if isinstance(value, float):
        return f"{value:g}"
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


def _alpha(options: RunOptions) -> float:
    return options.alpha if options.alpha is not None else np.pi / 2


def _run_canonical(psi: Ket, rng, options: RunOptions) -> ProtocolResult:
    M, K = len(psi.dims), psi.dims[0]
    return protocols.verify_canonical_equal(psi, M, K, rng)


def _run_gr_twisted(psi: Ket, rng, options: RunOptions) -> ProtocolResult:
    return stator.gr_twisted_basis_measure(psi, EbitPool(1, BellKind.PHI_PLUS), rng)


def _run_gr_general(psi: Ket, rng, options: RunOptions) -> ProtocolResult:
    alpha = _alpha(options)
    pool = EbitPool(options.max_rounds, BellKind.PHI_PLUS)
    return stator.gr_general_angle_measure(psi, alpha, pool, options.max_rounds, rng)


def _run_partial_teleport(psi: Ket, rng, options: RunOptions) -> ProtocolResult:
    return vaidman.partial_teleport_protocol(psi, EbitPool(len(psi.dims)), rng)


def _bipartite_observable(psi: Ket, options: RunOptions) -> Tuple[int, Operator, Optional[np.ndarray]]:
    K = len(psi.dims) // 2
    name = options.observable or ('twisted' if K == 1 else 'ghz')
    O, basis = vaidman_observable(name, 2 * K, _alpha(options))
    return K, O, basis


def _bipartite_pool(K: int, max_rounds: int) -> EbitPool:
    return EbitPool(3 * K + 4 * K * (max_rounds - 1))


def _run_vaidman_bipartite(psi: Ket, rng, options: RunOptions) -> ProtocolResult:
    K, O, basis = _bipartite_observable(psi, options)
    return vaidman.vaidman_bipartite_measure(psi, O, K, _bipartite_pool(K, options.max_rounds), options.max_rounds,
                                             rng, basis)


def _exact_vaidman_bipartite(psi: Ket, options: RunOptions) -> Dict[str, float]:
    K, O, basis = _bipartite_observable(psi, options)
    p = vaidman.bipartite_success_probability(K, options.max_rounds)
    return {format_value(k): v for k, v in vaidman.exact_distribution(psi, O, p, basis).items()}


def _three_party_observable(options: RunOptions) -> Tuple[Operator, Optional[np.ndarray]]:
    return vaidman_observable(options.observable or 'product', 3)


def _run_vaidman_three_party(psi: Ket, rng, options: RunOptions) -> ProtocolResult:
    O, basis = _three_party_observable(options)
    return vaidman.vaidman_three_party_measure(psi, O, EbitPool(8 + 9 * (options.max_rounds - 1)), options.max_rounds, rng,
                                               basis)


def _exact_vaidman_three_party(psi: Ket, options: RunOptions) -> Dict[str, float]:
    O, basis = _three_party_observable(options)
    p = vaidman.three_party_success_probability(options.max_rounds)
    return {format_value(k): v for k, v in vaidman.exact_distribution(psi, O, p, basis).items()}


PROTOCOLS: Dict[str, ProtocolEntry] = {entry.name: entry for entry in [
    ProtocolEntry('aa_total_spin_z', CORRELATED_METERS, "nondemolition measurement of total spin z",
                  'psi_plus', lambda psi, rng, o: protocols.aa_total_spin_z(psi, rng)),
    ProtocolEntry('aa_verify_singlet', STATE_VERIFICATION, "verification of the singlet with three meter banks",
                  'psi_minus', lambda psi, rng, o: protocols.aa_verify_singlet(psi, rng)),
    ProtocolEntry('aa_total_spin_then_singlet', STATE_VERIFICATION,
                  "total spin z, then singlet verification; fixes the total spin squared",
                  'psi_plus', lambda psi, rng, o: protocols.aa_total_spin_then_singlet(psi, rng)),
    ProtocolEntry('verify_canonical_equal', STATE_VERIFICATION,
                  "verification of an equal-coefficient canonical state of M parties",
                  'canonical(3,2)', _run_canonical),
    ProtocolEntry('gr_twisted', STATOR, "twisted product basis measured through one stator ebit",
                  'twisted_1', _run_gr_twisted),
    ProtocolEntry('gr_general_angle', STATOR, "repeat-until-success twisted basis at a general angle",
                  'twisted_3@pi/4', _run_gr_general, marginalize=('dial', 'idle')),
    ProtocolEntry('partial_teleport', PARTIAL_TELEPORTATION, "uncorrected teleportation of every qubit",
                  'product(u)', _run_partial_teleport),
    ProtocolEntry('vaidman_bipartite', PARTIAL_TELEPORTATION,
                  "nonlocal observable measured by rounds of partial teleportation",
                  'twisted_2', _run_vaidman_bipartite, exact=_exact_vaidman_bipartite),
    ProtocolEntry('vaidman_three_party', PARTIAL_TELEPORTATION,
                  "three-party variant with channels chosen by previous records",
                  'product(udu)', _run_vaidman_three_party, exact=_exact_vaidman_three_party),
]}


AUDITS: Dict[str, AuditEntry] = {entry.name: entry for entry in [
    AuditEntry('phi_scan', "signalling of the M_phi basis measurement over phi", audits.phi_scan, ['seed']),
    AuditEntry('pv_theorems', "support and linearity statements on verification models", audits.pv_theorems,
               ['cases', 'seed']),
    AuditEntry('entangled_projector', "ideal measurement of a partially entangled projector",
               audits.entangled_projector, ['seed']),
    AuditEntry('degenerate_demo', "superluminal signal through a degenerate eigenspace", audits.degenerate_demo),
    AuditEntry('protocol_nosignal', "every shipped measurement against remote unitaries", audits.protocol_nosignal,
               ['seed']),
]}


def get_protocol(name: str) -> ProtocolEntry:
    if name not in PROTOCOLS:
        raise UsageError(f"unknown protocol '{name}'; available: {', '.join(PROTOCOLS)}")
    return PROTOCOLS[name]


def get_audit(name: str) -> AuditEntry:
    if name not in AUDITS:
        raise UsageError(f"unknown audit '{name}'; available: {', '.join(AUDITS)}")
    return AUDITS[name]


NAMED_STATES: List[Tuple[str, str]] = [
    ('psi_minus, psi_plus, phi_minus, phi_plus', 'Bell states'),
    ('basis_1 .. basis_4', '|uu>, |dd>, |ud>, |du>'),
    ('twisted_1 .. twisted_4[@alpha]', 'twisted product basis, alpha in radians or pi/n'),
    ('canonical(K,M)', 'equal-coefficient canonical state of M parties of dimension K'),
    ('product(ud+-)', 'product of z and x spin states'),
    ('amps[AxB]:re,im;re,im;...', 'explicit amplitudes, qubit dims inferred when omitted'),
]


def catalog() -> Dict[str, Any]:
    return {
        'protocols': [{'name': e.name, 'topic': e.topic, 'description': e.description,
                       'default_state': e.default_state} for e in PROTOCOLS.values()],
        'audits': [{'name': e.name, 'topic': e.topic, 'description': e.description, 'options': e.options}
                   for e in AUDITS.values()],
        'states': [{'spec': spec, 'description': text} for spec, text in NAMED_STATES],
        'observables': VAIDMAN_OBSERVABLES,
    }
