"""No-signalling auditor.

A MeasurementModel is a unitary on system (x) apparatus with a site for every
subsystem: site 1, site 2, or 0 for a record that lives at neither. The
auditor asks whether outcome probabilities of local measurements at site 1
move when site 2 applies a local unitary beforehand.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import unitary_group

from nonlocal_lab import bell, config, meters, statevec
from nonlocal_lab.errors import PreconditionError
from nonlocal_lab.protocols import singlet_verification_stages
from nonlocal_lab.statevec import Ket, Operator

LocalObservable = Tuple[Operator, float]


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    system_dims: Tuple[int, ...]
    apparatus_dims: Tuple[int, ...]
    apparatus_init: Ket
    unitary: Operator
    system_sites: Tuple[int, ...]
    apparatus_sites: Tuple[int, ...]
    label: str = 'model'

    def __post_init__(self):
        dims = tuple(self.system_dims) + tuple(self.apparatus_dims)
        if self.unitary.dims != dims:
            raise PreconditionError(f"model unitary dims {list(self.unitary.dims)} != {list(dims)}")
        if not self.unitary.is_unitary(config.UNITARY_TOL):
            raise PreconditionError(f"model '{self.label}' is not unitary")
        if self.apparatus_init.dims != tuple(self.apparatus_dims):
            raise PreconditionError("apparatus state does not match apparatus dims")
        if len(self.system_sites) != len(self.system_dims) or len(self.apparatus_sites) != len(self.apparatus_dims):
            raise PreconditionError("every subsystem needs a site")

    def site_indices(self, site: int, system_only: bool = True) -> List[int]:
        found = [i for i, s in enumerate(self.system_sites) if s == site]
        if not system_only:
            offset = len(self.system_dims)
            found += [offset + i for i, s in enumerate(self.apparatus_sites) if s == site]
        return found

    def site_of(self, index: int) -> int:
        sites = tuple(self.system_sites) + tuple(self.apparatus_sites)
        return sites[index]

    def evolve(self, psi: Ket) -> Ket:
        if psi.dims != tuple(self.system_dims):
            raise PreconditionError(f"state dims {list(psi.dims)} != system dims {list(self.system_dims)}")
        return statevec.apply(self.unitary, statevec.tensor(psi, self.apparatus_init))


@dataclass
class SignalingReport:
    max_deviation: float
    witness: Dict[str, Any] = field(default_factory=dict)
    samples_tested: int = 0

    def to_json(self) -> Dict[str, Any]:
        return {'max_deviation': self.max_deviation, 'witness': self.witness, 'samples_tested': self.samples_tested}


def _outcome_projector(A1: Operator, a: float) -> Operator:
    for value, proj in statevec.eigenprojectors(A1):
        if abs(value - a) <= config.PROB_TOL:
            return proj
    raise PreconditionError(f"{a} is not an eigenvalue of the local observable")


def local_outcome_prob(model: MeasurementModel, psi: Ket, A1: Operator, a: float,
                       targets: Optional[Sequence[int]] = None) -> float:
    """Probability of reading a on A1 after the model has run on psi."""
    targets = model.site_indices(1) if targets is None else list(targets)
    sites = {model.site_of(t) for t in targets}
    if len(sites) != 1 or 0 in sites:
        raise PreconditionError("a local observable must sit on a single site")
    evolved = model.evolve(psi)
    p = statevec.expectation(_outcome_projector(A1, a), evolved, targets)
    return float(np.clip(p, 0.0, 1.0))


def signaling_score(model: MeasurementModel, psi: Ket, u2samples: Sequence[Operator],
                    a1samples: Sequence[LocalObservable]) -> SignalingReport:
    site2 = model.site_indices(2)
    site2_dims = tuple(model.system_dims[i] for i in site2)
    baseline = [local_outcome_prob(model, psi, A1, a) for A1, a in a1samples]
    report = SignalingReport(0.0, {}, 0)
    for u_index, u2 in enumerate(u2samples):
        if u2.dims != site2_dims:
            raise PreconditionError(f"remote sample acts on {list(u2.dims)}, site 2 holds {list(site2_dims)}")
        if not u2.is_unitary():
            raise PreconditionError("remote sample is not unitary")
        moved = statevec.apply(u2, psi, site2)
        for o_index, ((A1, a), p0) in enumerate(zip(a1samples, baseline)):
            deviation = abs(local_outcome_prob(model, moved, A1, a) - p0)
            report.samples_tested += 1
            if deviation > report.max_deviation or not report.witness:
                report.max_deviation = max(report.max_deviation, deviation)
                report.witness = {'u2_index': u_index, 'observable_index': o_index, 'outcome': a,
                                  'u2': u2.to_json(), 'observable': A1.to_json()}
    return report


# Sample sets

def pauli_observables(dims: Sequence[int]) -> List[LocalObservable]:
    """Tomographically complete local test set: spin components for a qubit,
    basis and pairwise superposition projectors otherwise."""
    dims = tuple(dims)
    if dims == (2,):
        return [(statevec.spin(axis), 0.5) for axis in ('x', 'y', 'z')]
    side = statevec.dim_product(dims)
    observables = []
    for i in range(side):
        observables.append((statevec.projector(statevec.basis_ket((side,), (i,))), 1.0))
        for j in range(i + 1, side):
            for phase in (1, 1j):
                v = np.zeros(side, dtype=complex)
                v[i], v[j] = 1, phase
                observables.append((statevec.projector(Ket((side,), v / np.sqrt(2))), 1.0))
    return [(Operator(dims, op.mat, statevec.HERMITIAN), a) for op, a in observables]


def structured_unitaries(dims: Sequence[int]) -> List[Operator]:
    """Paulis and quarter turns on every qubit, plus shift, clock and Fourier on the whole site."""
    dims = tuple(dims)
    samples = [Operator.identity(dims)]
    for index, d in enumerate(dims):
        if d != 2:
            continue
        local = [statevec.pauli(p) for p in ('x', 'y', 'z')] + [statevec.rotation(p, np.pi / 2) for p in ('x', 'y', 'z')]
        samples.extend(statevec.embed(u, [index], dims) for u in local)
    side = statevec.dim_product(dims)
    if dims != (2,):
        idx = np.arange(side)
        shift = np.roll(np.eye(side), 1, axis=0)
        clock = np.diag(np.exp(2j * np.pi * idx / side))
        fourier = np.exp(2j * np.pi * np.outer(idx, idx) / side) / np.sqrt(side)
        samples.extend(Operator(dims, m, statevec.UNITARY) for m in (shift, clock, shift @ clock, fourier))
    return samples


def haar_unitaries(dims: Sequence[int], count: int, seed: int) -> List[Operator]:
    dims = tuple(dims)
    side = statevec.dim_product(dims)
    draws = unitary_group.rvs(side, size=count, random_state=np.random.default_rng(seed))
    draws = np.asarray(draws).reshape(count, side, side)
    return [Operator(dims, m, statevec.UNITARY) for m in draws]


def remote_samples(model: MeasurementModel, haar: int = config.HAAR_SAMPLES, seed: int = 0) -> List[Operator]:
    dims = tuple(model.system_dims[i] for i in model.site_indices(2))
    return structured_unitaries(dims) + (haar_unitaries(dims, haar, seed) if haar else [])


def local_samples(model: MeasurementModel) -> List[LocalObservable]:
    return pauli_observables([model.system_dims[i] for i in model.site_indices(1)])


def audit_model(model: MeasurementModel, psi: Ket, haar: int = config.HAAR_SAMPLES, seed: int = 0) -> SignalingReport:
    return signaling_score(model, psi, remote_samples(model, haar, seed), local_samples(model))


# Model builders

def instrument_model(system_dims: Sequence[int], stages: Sequence[Sequence[Operator]],
                     system_sites: Sequence[int] = (1, 2), record_sites: Optional[Sequence[int]] = None,
                     label: str = 'instrument') -> MeasurementModel:
    """Sequential projective stages, each written into its own record register.

    Stage s acts as sum_k P_k (x) X^k on record s, so every branch carries the
    Lueders post-state of its class.
    """
    system_dims = tuple(system_dims)
    n = len(system_dims)
    record_dims = tuple(max(2, len(stage)) for stage in stages)
    dims = system_dims + record_dims
    total = Operator.identity(dims)
    for s, stage in enumerate(stages):
        statevec._check_projectors(stage)
        d = record_dims[s]
        side = statevec.dim_product(system_dims)
        mat = np.zeros((side * d, side * d), dtype=complex)
        for k, proj in enumerate(stage):
            mat += np.kron(proj.mat, np.roll(np.eye(d), k, axis=0))
        step = Operator(system_dims + (d,), mat, statevec.UNITARY)
        total = statevec.embed(step, list(range(n)) + [n + s], dims) @ total
    init = statevec.tensor_all([statevec.basis_ket((d,), (0,)) for d in record_dims])
    sites = tuple(record_sites) if record_sites is not None else (0,) * len(stages)
    return MeasurementModel(system_dims, record_dims, init, total, tuple(system_sites), sites, label)


def ideal_measurement_model(basis: Sequence[Ket], label: str = 'ideal') -> MeasurementModel:
    dims = basis[0].dims
    return instrument_model(dims, [[statevec.projector(v) for v in basis]], tuple(range(1, len(dims) + 1)),
                            label=label)


def mphi_basis(phi: float) -> List[Ket]:
    """psi_phi, its orthogonal partner in span{|ud>, |du>}, then |uu> and |dd>."""
    ud = statevec.basis_ket((2, 2), (0, 1)).amps
    du = statevec.basis_ket((2, 2), (1, 0)).amps
    return [
        Ket((2, 2), np.cos(phi) * ud + np.sin(phi) * du),
        Ket((2, 2), np.sin(phi) * ud - np.cos(phi) * du),
        statevec.basis_ket((2, 2), (0, 0)),
        statevec.basis_ket((2, 2), (1, 1)),
    ]


def mphi_model(phi: float) -> MeasurementModel:
    return ideal_measurement_model(mphi_basis(phi), label=f"mphi({phi:.6f})")


def meter_model(observables: Sequence[meters.Observable], system_dims: Sequence[int], bank: meters.MeterBank,
                weights: Optional[Sequence[float]] = None, mode: str = meters.SUM,
                label: str = 'meters') -> MeasurementModel:
    """Correlated meters with each dial at the site of the observable it reads."""
    system_dims = tuple(system_dims)
    U = meters.coupling_unitary(system_dims, observables, bank, weights, mode)
    meter_sites = tuple(1 + min(meters._targets(t)) for _, t in observables)
    return MeasurementModel(system_dims, (bank.D,) * bank.N, bank.state, U,
                            tuple(range(1, len(system_dims) + 1)), meter_sites, label)


def singlet_model(site1_dim: int = 2) -> MeasurementModel:
    return instrument_model((site1_dim, 2), singlet_verification_stages(site1_dim), label=f"singlet({site1_dim})")


def stator_model(alpha: float = np.pi / 2) -> MeasurementModel:
    """First stator round with every measurement deferred.

    System (A at site 1, B at site 2); apparatus a at site 1 and b at site 2
    start in Phi+.
    """
    dims = (2, 2, 2, 2)
    cy = statevec.controlled(2, 1, statevec.pauli('y'))
    bob = statevec.embed(cy, [3, 1], dims)
    turn = statevec.controlled(2, 1, statevec.rotation('x', -alpha))
    alice = statevec.embed(turn, [0, 2], dims)
    return MeasurementModel((2, 2), (2, 2), bell.make_bell(bell.BellKind.PHI_PLUS), alice @ bob,
                            (1, 2), (1, 2), 'stator')


def _bell_rotation() -> Operator:
    """Maps the Bell states onto computational basis states (CNOT then Hadamard)."""
    cnot = statevec.controlled(2, 1, statevec.pauli('x'))
    hadamard = Operator((2,), np.array([[1, 1], [1, -1]]) / np.sqrt(2), statevec.UNITARY)
    return statevec.tensor(hadamard, Operator.identity((2,))) @ cnot


def teleport_round_model(O: Operator) -> MeasurementModel:
    """One partial-teleportation round (K = 1) with Bell measurements deferred.

    Apparatus: singlet (x0 at B's site, y0 at A's) carries B to Alice, who
    rotates the eigenbasis of O onto z states and sends both qubits back on
    singlets (x1, x2 at site 1; y1, y2 at site 2).
    """
    values, vectors = np.linalg.eigh(O.mat)
    W = Operator((2, 2), vectors.conj().T, statevec.UNITARY)
    dims = (2,) * 8
    A, B, x0, y0, x1, y1, x2, y2 = range(8)
    bell_rot = _bell_rotation()
    steps = [
        statevec.embed(bell_rot, [B, x0], dims),
        statevec.embed(W, [A, y0], dims),
        statevec.embed(bell_rot, [A, x1], dims),
        statevec.embed(bell_rot, [y0, x2], dims),
    ]
    total = Operator.identity(dims)
    for step in steps:
        total = step @ total
    init = statevec.tensor_all([bell.make_bell(bell.BellKind.PSI_MINUS)] * 3)
    return MeasurementModel((2, 2), (2,) * 6, init, total, (1, 2), (2, 1, 1, 2, 1, 2), 'teleport_round')


# Theorem checks

def _support_projector(psi0: Ket, site1: Sequence[int]) -> np.ndarray:
    rho = statevec.reduced_density(psi0, site1)
    values, vectors = np.linalg.eigh(rho.mat)
    support = vectors[:, values > config.PSD_TOL]
    return support @ support.conj().T


def _in_support(model: MeasurementModel, psi0: Ket, psi: Ket) -> bool:
    site1 = model.site_indices(1)
    local = Operator(tuple(psi0.dims[i] for i in site1), _support_projector(psi0, site1), statevec.GENERAL)
    projected = statevec._apply_matrix(local.mat, local.dims, psi.tensor, site1).reshape(-1)
    return float(np.linalg.norm(psi.amps - projected)) <= config.SIGNAL_TOL


def check_pv_theorem1(model: MeasurementModel, psi0: Ket, test_states: Sequence[Ket], A1: Operator, a: float) -> float:
    """Spread of p(a) over states in (site-1 support of psi0) (x) everything at site 2."""
    for i, psi in enumerate(test_states):
        if not _in_support(model, psi0, psi):
            raise PreconditionError(f"test state {i} leaves the site-1 support of the verified state")
    p0 = local_outcome_prob(model, psi0, A1, a)
    return max((abs(local_outcome_prob(model, psi, A1, a) - p0) for psi in test_states), default=0.0)


def check_pv_theorem2(model: MeasurementModel, psi0: Ket, psi_prime: Ket, psi_dd: Optional[Ket], alpha: complex,
                      beta: complex, A1: Operator, a: float) -> float:
    """|p(alpha psi' + beta psi'') - (|alpha|^2 p(psi0) + |beta|^2 p(psi''))|."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > config.NORM_INPUT_TOL:
        raise PreconditionError("|alpha|^2 + |beta|^2 must be 1")
    if not _in_support(model, psi0, psi_prime):
        raise PreconditionError("psi' must lie in the site-1 support of the verified state")
    if abs(beta) < config.NORM_TOL:
        return abs(local_outcome_prob(model, psi_prime, A1, a) - local_outcome_prob(model, psi0, A1, a))
    if psi_dd is None:
        raise PreconditionError("psi'' is required when beta != 0")
    site1 = model.site_indices(1)
    support = _support_projector(psi0, site1)
    inside = statevec._apply_matrix(support, tuple(psi0.dims[i] for i in site1), psi_dd.tensor, site1).reshape(-1)
    if np.linalg.norm(inside) > config.SIGNAL_TOL:
        raise PreconditionError("psi'' must lie outside the site-1 support of the verified state")
    mixed = Ket(psi0.dims, alpha * psi_prime.amps + beta * psi_dd.amps)
    expected = abs(alpha) ** 2 * local_outcome_prob(model, psi0, A1, a) + abs(beta) ** 2 * local_outcome_prob(model, psi_dd, A1, a)
    return abs(local_outcome_prob(model, mixed, A1, a) - expected)


def entangled_projector_signaling(alpha: complex, beta: complex, haar: int = config.HAAR_SAMPLES,
                                  seed: int = 0) -> SignalingReport:
    """Lueders measurement of {P, 1 - P}, P onto alpha|uu> + beta|dd>, tested on that state."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > config.NORM_INPUT_TOL:
        raise PreconditionError("|alpha|^2 + |beta|^2 must be 1")
    psi0 = Ket((2, 2), np.array([alpha, 0, 0, beta], dtype=complex))
    P = statevec.projector(psi0)
    rest = Operator((2, 2), np.eye(4) - P.mat, statevec.HERMITIAN)
    model = instrument_model((2, 2), [[P, rest]], label='entangled_projector')
    return audit_model(model, psi0, haar, seed)


def degenerate_eigenstate_signal_demo(alpha1: float = config.DEGENERATE_DEMO_ALPHA1) -> SignalingReport:
    """Site 1 prepares |u> or |d>; an ideal measurement of diag(0, 0, 0, 1) follows;
    site 2 then checks for the state alpha1|u> + alpha2|d> it started in."""
    alpha2 = np.sqrt(max(0.0, 1.0 - abs(alpha1) ** 2))
    chi = Ket((2,), np.array([alpha1, alpha2], dtype=complex))
    O = Operator((2, 2), np.diag([0, 0, 0, 1]).astype(complex), statevec.HERMITIAN)
    model = instrument_model((2, 2), [[p for _, p in statevec.eigenprojectors(O)]], label='degenerate')
    check = statevec.projector(chi)
    p_yes = []
    for spin in (statevec.UP, statevec.DOWN):
        prepared = statevec.tensor(Ket((2,), spin), chi)
        p_yes.append(local_outcome_prob(model, prepared, check, 1.0, targets=[1]))
    return SignalingReport(abs(p_yes[0] - p_yes[1]), {'preparations': ['up', 'down'], 'p_yes': p_yes}, 2)
