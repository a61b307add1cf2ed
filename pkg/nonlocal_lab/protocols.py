"""Correlated-meter protocols: total spin, singlet verification, canonical-form verification."""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from nonlocal_lab import bell, config, meters, statevec
from nonlocal_lab.bell import BellKind
from nonlocal_lab.engine import ProtocolResult, ProtocolRun
from nonlocal_lab.errors import PreconditionError
from nonlocal_lab.simple_logger import log
from nonlocal_lab.statevec import Ket, Operator

SPIN_AXES = ('z', 'x', 'y')


def _require_qubit_pair(psi: Ket) -> None:
    if psi.dims != (2, 2):
        raise PreconditionError(f"expected two qubits, got dims {list(psi.dims)}")


def _spin_bank() -> meters.MeterBank:
    return meters.prepare_bank(2, config.SPIN_SUM_DIAL, config.SPIN_SPACING)


def _total_spin(run: ProtocolRun, axis: str, record: str) -> float:
    observables = [('A', statevec.spin(axis), ['A']), ('B', statevec.spin(axis), ['B'])]
    return run.meter_measurement(observables, _spin_bank(), record).value


def _verify_singlet_stages(run: ProtocolRun, prefix: str) -> Tuple[bool, List[str]]:
    """Total spin x, y and z read by three banks; the singlet is the only state reading zero on all."""
    records, values = [], []
    for axis in SPIN_AXES:
        record = f"{prefix}{axis}"
        values.append(_total_spin(run, axis, record))
        records.extend([f"{record}.A", f"{record}.B"])
    return all(abs(v) < config.LATTICE_TOL for v in values), records


def aa_total_spin_z(psi: Ket, rng) -> ProtocolResult:
    _require_qubit_pair(psi)
    run = ProtocolRun('aa_total_spin_z', psi, ['A', 'B'], {'A': 'A', 'B': 'B'}, rng)
    value = _total_spin(run, 'z', 'sigma_z')
    dials = run.gather('A', ['sigma_z.A', 'sigma_z.B'])
    run.announce('A', 'sigma_z', value, list(dials))
    return run.result(value, run.register.ordered(['A', 'B']), details={'dials': dials})


def _singlet_complement(psi: Ket) -> Ket:
    singlet = bell.make_bell(BellKind.PSI_MINUS).amps
    return Ket.from_amplitudes(psi.amps - np.vdot(singlet, psi.amps) * singlet, psi.dims)


def aa_verify_singlet(psi: Ket, rng) -> ProtocolResult:
    """Two-outcome verification of the singlet.

    A "yes" leaves the singlet in place. A "no" reports psi projected off the singlet; the meter
    banks themselves leave a triplet eigenstate behind, which stays in `final_register`.
    """
    _require_qubit_pair(psi)
    run = ProtocolRun('aa_verify_singlet', psi, ['A', 'B'], {'A': 'A', 'B': 'B'}, rng)
    verified, records = _verify_singlet_stages(run, 'sigma_')
    run.gather('A', records)
    answer = 'yes' if verified else 'no'
    run.announce('A', 'singlet', answer, records)
    post = run.register.ordered(['A', 'B']) if verified else _singlet_complement(psi)
    return run.result(answer, post)


def aa_total_spin_then_singlet(psi: Ket, rng) -> ProtocolResult:
    """Total spin z followed by singlet verification; together they fix sigma^2 for Bell inputs."""
    _require_qubit_pair(psi)
    run = ProtocolRun('aa_total_spin_then_singlet', psi, ['A', 'B'], {'A': 'A', 'B': 'B'}, rng)
    sigma_z = _total_spin(run, 'z', 'total_z')
    verified, records = _verify_singlet_stages(run, 'verify_')
    records = ['total_z.A', 'total_z.B'] + records
    run.gather('A', records)
    inferred = {
        'sigma_z': sigma_z,
        'singlet': 'yes' if verified else 'no',
        'total_spin_squared': 0.0 if verified else 2.0,
    }
    run.announce('A', 'total_spin', inferred, records)
    return run.result(inferred, run.register.ordered(['A', 'B']))


def index_observable(K: int, sign: int, basis: Optional[np.ndarray] = None) -> Operator:
    """sign * diag(1..K) in the given local basis."""
    vectors = np.eye(K, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    return statevec.hermitian_from_spectrum((K,), vectors, sign * np.arange(1, K + 1))


def shift_phase_observable(K: int, basis: Optional[np.ndarray] = None) -> Operator:
    """B with exp(iB) the cyclic shift |i> -> |i+1>; eigenvalue 2*pi*k/K on u_k."""
    idx = np.arange(K)
    fourier = np.exp(-2j * np.pi * np.outer(idx, idx) / K) / np.sqrt(K)
    vectors = fourier if basis is None else np.asarray(basis, dtype=complex) @ fourier
    return statevec.hermitian_from_spectrum((K,), vectors, 2 * np.pi * idx / K)


def verify_canonical_equal(psi: Ket, M: int, K: int, rng,
                           local_bases: Optional[Sequence[np.ndarray]] = None) -> ProtocolResult:
    """Verify sum_i |i...i>/sqrt(K) in the given local bases with M parties.

    Stage one checks A_1 + A_l = 0 for every l through ordinary sum banks;
    stage two checks sum_m B_m = 0 mod 2*pi through a modular bank.
    """
    if M < 2 or K < 2:
        raise PreconditionError("canonical verification needs M >= 2 parties of dimension K >= 2")
    if psi.dims != (K,) * M:
        raise PreconditionError(f"expected dims {[K] * M}, got {list(psi.dims)}")
    bases = [None] * M if local_bases is None else list(local_bases)
    if len(bases) != M:
        raise PreconditionError("one local basis per party is required")
    names = [f"P{m + 1}" for m in range(M)]
    run = ProtocolRun('verify_canonical_equal', psi, names, {n: n for n in names}, rng)

    records, stage_one = [], []
    for l in range(1, M):
        observables = [
            (names[0], index_observable(K, -1, bases[0]), [names[0]]),
            (names[l], index_observable(K, +1, bases[l]), [names[l]]),
        ]
        record = f"stage1_{l + 1}"
        stage_one.append(run.meter_measurement(observables, meters.prepare_bank(2, 2 * K - 1, 1.0), record).value)
        records.extend([f"{record}.{names[0]}", f"{record}.{names[l]}"])

    observables = [(n, shift_phase_observable(K, bases[m]), [n]) for m, n in enumerate(names)]
    bank = meters.prepare_modular_bank(M, K, 2 * np.pi / K)
    stage_two = run.meter_measurement(observables, bank, 'stage2', mode=meters.MODULAR).value
    records.extend(f"stage2.{n}" for n in names)

    run.gather(names[0], records)
    verified = all(abs(v) < config.LATTICE_TOL for v in stage_one) and abs(stage_two) < config.LATTICE_TOL
    answer = 'yes' if verified else 'no'
    log('DEBUG', f"verify_canonical_equal: stage one {stage_one}, stage two {stage_two:.6f}")
    run.announce(names[0], 'canonical', answer, records)
    return run.result(answer, run.register.ordered(names), details={
        'stage_one': [float(v) for v in stage_one],
        'stage_two': float(stage_two),
    })


def singlet_verification_stages(site1_dim: int = 2) -> List[List[Operator]]:
    """Class projectors of each stage of singlet verification on (site1_dim, 2).

    A site-1 qudit first gets a local stage separating levels {0, 1} from the
    rest; the spin operators then live on those two levels.
    """
    if site1_dim < 2:
        raise PreconditionError("site 1 needs at least two levels")
    dims = (site1_dim, 2)
    stages: List[List[Operator]] = []
    if site1_dim > 2:
        low = np.zeros((site1_dim, site1_dim), dtype=complex)
        low[0, 0] = low[1, 1] = 1.0
        inside = statevec.tensor(Operator((site1_dim,), low, statevec.HERMITIAN), Operator.identity((2,)))
        outside = Operator(dims, np.eye(2 * site1_dim) - inside.mat, statevec.HERMITIAN)
        stages.append([Operator(dims, inside.mat, statevec.HERMITIAN), outside])
    for axis in SPIN_AXES:
        embedded = np.zeros((site1_dim, site1_dim), dtype=complex)
        embedded[:2, :2] = statevec.SIGMA[axis] / 2
        local = Operator((site1_dim,), embedded, statevec.HERMITIAN)
        observables = [(local, 0), (statevec.spin(axis), 1)]
        stages.append([p for _, p in meters.class_projectors(dims, observables, config.SPIN_SPACING)])
    return stages


def canonical_verification_stages(M: int, K: int) -> List[List[Operator]]:
    dims = (K,) * M
    stages = []
    for l in range(1, M):
        observables = [(index_observable(K, -1), 0), (index_observable(K, +1), l)]
        stages.append([p for _, p in meters.class_projectors(dims, observables, 1.0)])
    observables = [(shift_phase_observable(K), m) for m in range(M)]
    stages.append([p for _, p in meters.class_projectors(dims, observables, 2 * np.pi / K, meters.MODULAR, K)])
    return stages
