"""Correlated von Neumann meters on a finite dial lattice.

Each meter is a D-level register whose Pi-basis index j carries the label
j (modular banks) or the symmetric label j or j - D. The bank starts in the
equal-amplitude superposition of every dial configuration whose labels sum to
zero mod D, which is the equal-q state in the dual (Fourier) basis. Coupling
meter i to a local observable with eigenvalue m*spacing shifts its dial by
-m, so the dial labels read out locally sum to minus the nonlocal value while
each single dial stays uniformly random.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from nonlocal_lab import config, statevec
from nonlocal_lab.branching import as_chooser
from nonlocal_lab.errors import InvariantBreach, PreconditionError
from nonlocal_lab.statevec import Ket, Operator

SUM = 'sum'
MODULAR = 'modular'
PRODUCT = 'product'

Target = Union[int, Sequence[int]]
Observable = Tuple[Operator, Target]


@dataclass(frozen=True)
class MeterRegister:
    D: int
    symmetric: bool = True

    def __post_init__(self):
        if self.symmetric and (self.D < 3 or self.D % 2 == 0):
            raise PreconditionError(f"a symmetric meter needs an odd dimension >= 3, got {self.D}")
        if self.D < 2:
            raise PreconditionError(f"a meter needs at least 2 dial positions, got {self.D}")

    def label(self, index: int) -> int:
        index = int(index) % self.D
        if self.symmetric and index > (self.D - 1) // 2:
            return index - self.D
        return index

    @property
    def labels(self) -> List[int]:
        return [self.label(j) for j in range(self.D)]


@dataclass(frozen=True, eq=False)
class MeterBank:
    N: int
    D: int
    spacing: float = 1.0
    modular: bool = False
    state: Ket = field(init=False)

    def __post_init__(self):
        if self.N < 1:
            raise PreconditionError("a meter bank needs at least one meter")
        if self.spacing <= 0:
            raise PreconditionError("meter spacing must be positive")
        register = MeterRegister(self.D, symmetric=not self.modular)
        object.__setattr__(self, 'register', register)
        shape = (self.D,) * self.N
        index_sum = sum(np.indices(shape))
        amps = np.where(index_sum % self.D == 0, self.D ** (-(self.N - 1) / 2), 0.0)
        object.__setattr__(self, 'state', Ket(shape, amps.reshape(-1)))
        self._check_fourier_identity()

    def _check_fourier_identity(self) -> None:
        dual = np.fft.fftn(self.state.tensor, norm='ortho')
        expected = np.zeros_like(dual)
        for q in range(self.D):
            expected[(q,) * self.N] = self.D ** -0.5
        if not np.allclose(dual, expected, atol=config.NORM_TOL, rtol=0):
            raise InvariantBreach("meter bank is not the equal-q state in the dual basis")

    def label(self, index: int) -> int:
        return self.register.label(index)

    @property
    def modulus(self) -> float:
        return self.D * self.spacing


def prepare_bank(N: int, D: int, spacing: float = 1.0) -> MeterBank:
    return MeterBank(N, D, spacing, modular=False)


def prepare_modular_bank(N: int, D: int, spacing: float = 1.0) -> MeterBank:
    return MeterBank(N, D, spacing, modular=True)


@dataclass(frozen=True, eq=False)
class Coupling:
    targets: Tuple[int, ...]
    dims: Tuple[int, ...]
    vectors: np.ndarray
    labels: np.ndarray


@dataclass
class MeterReading:
    value: float
    post: Ket
    dials: List[int]
    probability: float
    label: int


def lattice_spacing(values: Sequence[float], bound: int = config.DENOMINATOR_BOUND) -> float:
    """Largest spacing d with every value an integer multiple of d."""
    nonzero = [float(v) for v in values if abs(v) > config.LATTICE_TOL]
    if not nonzero:
        return 1.0
    base = min(abs(v) for v in nonzero)
    ratios = []
    for v in nonzero:
        ratio = Fraction(v / base).limit_denominator(bound)
        if abs(float(ratio) * base - v) > config.LATTICE_TOL * max(1.0, abs(v)):
            raise PreconditionError(f"spectrum is incommensurate: {v} is not a rational multiple of {base}")
        ratios.append(ratio)
    common = math.lcm(*(r.denominator for r in ratios))
    numerators = [int(r * common) for r in ratios]
    return base * math.gcd(*numerators) / common


def _as_fractions(weights: Sequence[float]) -> List[Fraction]:
    fractions = []
    for w in weights:
        f = Fraction(float(w)).limit_denominator(config.DENOMINATOR_BOUND)
        if abs(float(f) - float(w)) > config.LATTICE_TOL:
            raise PreconditionError(f"incommensurate weights: {w} has no denominator <= {config.DENOMINATOR_BOUND}")
        fractions.append(f)
    return fractions


def _targets(target: Target) -> Tuple[int, ...]:
    return (int(target),) if isinstance(target, (int, np.integer)) else tuple(int(t) for t in target)


def _spectra(observables: Sequence[Observable], weights: Optional[Sequence[float]], mode: str
             ) -> List[Tuple[Tuple[int, ...], Operator, np.ndarray, np.ndarray]]:
    if weights is not None and len(weights) != len(observables):
        raise PreconditionError("one weight per observable is required")
    factors = _as_fractions(weights) if weights is not None else [Fraction(1)] * len(observables)
    spectra = []
    for (op, target), w in zip(observables, factors):
        if not op.is_hermitian():
            raise PreconditionError("coupled observables must be Hermitian")
        values, vectors = np.linalg.eigh(op.mat)
        if mode == PRODUCT:
            if values.min() < config.POSITIVE_FLOOR:
                raise PreconditionError("product measurement needs strictly positive observables")
            values = np.log(values)
        spectra.append((_targets(target), op, values * float(w), vectors))
    all_targets = [t for targets, _, _, _ in spectra for t in targets]
    if len(set(all_targets)) != len(all_targets):
        raise PreconditionError("coupled observables must act on disjoint subsystems")
    return spectra


def build_couplings(dims: Sequence[int], observables: Sequence[Observable], spacing: float,
                    weights: Optional[Sequence[float]] = None, mode: str = SUM) -> List[Coupling]:
    couplings = []
    for targets, op, values, vectors in _spectra(observables, weights, mode):
        for t in targets:
            if not 0 <= t < len(dims):
                raise PreconditionError(f"subsystem index {t} out of range")
        expected = tuple(dims[t] for t in targets)
        if op.dims != expected:
            raise PreconditionError(f"observable dims {list(op.dims)} do not match subsystems {list(expected)}")
        labels = np.rint(values / spacing)
        if np.abs(labels * spacing - values).max() > config.LATTICE_TOL:
            raise PreconditionError(f"spectrum {np.round(values, 6).tolist()} is off the lattice of spacing {spacing}")
        couplings.append(Coupling(targets, op.dims, vectors, labels.astype(int)))
    return couplings


def _achievable_sums(couplings: Sequence[Coupling]) -> List[int]:
    sums = {0}
    for c in couplings:
        sums = {s + int(m) for s in sums for m in set(c.labels.tolist())}
    return sorted(sums)


def _check_unaliased(couplings: Sequence[Coupling], D: int) -> List[int]:
    sums = _achievable_sums(couplings)
    if len({s % D for s in sums}) != len(sums):
        raise PreconditionError(f"D too small: dial dimension {D} aliases achievable sums {sums}")
    return sums


def _eigenframe(psi: Ket, couplings: Sequence[Coupling]) -> Tuple[np.ndarray, List[int]]:
    order = [t for c in couplings for t in c.targets]
    rest = [i for i in range(len(psi.dims)) if i not in order]
    shape = [statevec.dim_product(c.dims) for c in couplings]
    shape.append(statevec.dim_product([psi.dims[i] for i in rest]))
    frame = np.transpose(psi.tensor, order + rest).reshape(shape)
    for axis, c in enumerate(couplings):
        frame = np.moveaxis(np.tensordot(c.vectors.conj().T, frame, axes=([1], [axis])), 0, axis)
    return frame, order + rest


def _from_eigenframe(frame: np.ndarray, couplings: Sequence[Coupling], axes: List[int], dims: Tuple[int, ...]) -> np.ndarray:
    for axis, c in enumerate(couplings):
        frame = np.moveaxis(np.tensordot(c.vectors, frame, axes=([1], [axis])), 0, axis)
    shaped = frame.reshape([dims[i] for i in axes])
    return np.transpose(shaped, np.argsort(axes)).reshape(-1)


def _key_grid(couplings: Sequence[Coupling], modulus: Optional[int]) -> np.ndarray:
    grid = np.zeros([len(c.labels) for c in couplings], dtype=int)
    for axis, c in enumerate(couplings):
        shape = [1] * len(couplings)
        shape[axis] = -1
        grid = grid + c.labels.reshape(shape)
    return grid % modulus if modulus is not None else grid


def _class_weights(psi: Ket, couplings: Sequence[Coupling], modulus: Optional[int]):
    frame, axes = _eigenframe(psi, couplings)
    grid = _key_grid(couplings, modulus)
    weights = (np.abs(frame) ** 2).sum(axis=-1)
    keys = sorted(set(grid.reshape(-1).tolist()))
    probabilities = np.array([weights[grid == k].sum() for k in keys])
    return frame, axes, grid, keys, probabilities


def _key_modulus(bank: MeterBank, mode: str) -> Optional[int]:
    return bank.D if mode == MODULAR else None


def _value(key: int, bank: MeterBank, mode: str) -> float:
    if mode == PRODUCT:
        return float(np.exp(key * bank.spacing))
    return key * bank.spacing


def couple_and_read(psi: Ket, couplings: Sequence[Coupling], bank: MeterBank, rng, mode: str = SUM) -> MeterReading:
    """Impulsive coupling followed by a local readout of every dial.

    Works class by class in the eigenframe of the couplings: the summed class is drawn by Born weight
    and the dials are drawn uniformly on the shell that decodes to it. Only `readout_distribution`
    builds the coupling unitary densely.
    """
    if bank.N != len(couplings):
        raise PreconditionError(f"bank has {bank.N} meters for {len(couplings)} observables")
    if (mode == MODULAR) != bank.modular:
        raise PreconditionError("modular sums need a modular bank, other sums a symmetric one")
    chooser = as_chooser(rng)
    if mode != MODULAR:
        _check_unaliased(couplings, bank.D)
    frame, axes, grid, keys, probabilities = _class_weights(psi, couplings, _key_modulus(bank, mode))
    k = chooser.choose(probabilities, 'outcome')
    key, p = keys[k], float(probabilities[k])
    if p <= config.PROB_TOL:
        raise InvariantBreach(f"zero-probability class {key} drawn")

    dials = [chooser.choose(np.full(bank.D, 1.0 / bank.D), 'dial') for _ in range(bank.N - 1)]
    dials.append((-key - sum(dials)) % bank.D)
    labels = [bank.label(j) for j in dials]

    projected = np.where((grid == key)[..., None], frame, 0.0)
    post = _from_eigenframe(projected, couplings, axes, psi.dims) / np.sqrt(p)
    return MeterReading(_value(key, bank, mode), Ket(psi.dims, post), labels, p / bank.D ** (bank.N - 1), key)


def measure_sum(psi: Ket, observables: Sequence[Observable], bank: MeterBank, rng) -> Tuple[float, Ket]:
    reading = couple_and_read(psi, build_couplings(psi.dims, observables, bank.spacing), bank, rng, SUM)
    return reading.value, reading.post


def measure_linear_combination(psi: Ket, observables: Sequence[Observable], weights: Sequence[float],
                               bank: MeterBank, rng) -> Tuple[float, Ket]:
    couplings = build_couplings(psi.dims, observables, bank.spacing, weights=weights)
    reading = couple_and_read(psi, couplings, bank, rng, SUM)
    return reading.value, reading.post


def measure_product_positive(psi: Ket, observables: Sequence[Observable], bank: MeterBank, rng) -> Tuple[float, Ket]:
    reading = couple_and_read(psi, build_couplings(psi.dims, observables, bank.spacing, mode=PRODUCT), bank, rng, PRODUCT)
    return reading.value, reading.post


def measure_modular_sum(psi: Ket, observables: Sequence[Observable], modulus: float, bank: MeterBank,
                        rng) -> Tuple[float, Ket]:
    if abs(modulus - bank.modulus) > config.LATTICE_TOL:
        raise PreconditionError(f"modulus {modulus} is not D*spacing = {bank.modulus}")
    reading = couple_and_read(psi, build_couplings(psi.dims, observables, bank.spacing), bank, rng, MODULAR)
    return reading.value, reading.post


def sum_bank(observables: Sequence[Observable], weights: Optional[Sequence[float]] = None, mode: str = SUM,
             modulus: Optional[float] = None) -> MeterBank:
    """Smallest bank able to read the given sum without aliasing."""
    spectra = _spectra(observables, weights, mode)
    spacing = lattice_spacing(np.concatenate([values for _, _, values, _ in spectra]))
    if mode == MODULAR:
        if modulus is None:
            raise PreconditionError("a modular bank needs a modulus")
        D = int(round(modulus / spacing))
        if D < 2 or abs(D * spacing - modulus) > config.LATTICE_TOL:
            raise PreconditionError(f"modulus {modulus} is not a multiple of the spectrum spacing {spacing}")
        return prepare_modular_bank(len(observables), D, spacing)
    reach = sum(int(np.abs(np.rint(values / spacing)).max()) for _, _, values, _ in spectra)
    return prepare_bank(len(observables), max(3, 2 * reach + 1), spacing)


def sum_distribution(psi: Ket, observables: Sequence[Observable], bank: MeterBank,
                     weights: Optional[Sequence[float]] = None, mode: str = SUM) -> Dict[float, float]:
    """Exact value -> probability map of a meter measurement; zero entries are omitted."""
    couplings = build_couplings(psi.dims, observables, bank.spacing, weights=weights, mode=mode)
    if mode != MODULAR:
        _check_unaliased(couplings, bank.D)
    _, _, _, keys, probabilities = _class_weights(psi, couplings, _key_modulus(bank, mode))
    return {_value(k, bank, mode): float(p) for k, p in zip(keys, probabilities) if p > config.PROB_TOL}


def class_projectors(dims: Sequence[int], observables: Sequence[Observable], spacing: float,
                     mode: str = SUM, modulus: Optional[int] = None,
                     weights: Optional[Sequence[float]] = None) -> List[Tuple[int, Operator]]:
    """Projectors onto each class of the summed spectrum, keyed by lattice label."""
    dims = tuple(dims)
    couplings = build_couplings(dims, observables, spacing, weights=weights, mode=mode)
    pieces = []
    for c in couplings:
        by_label: Dict[int, Operator] = {}
        for m in sorted(set(c.labels.tolist())):
            local = statevec.projector_onto(c.dims, c.vectors[:, c.labels == m].T)
            by_label[m] = statevec.embed(local, c.targets, dims)
        pieces.append(by_label)
    side = statevec.dim_product(dims)
    classes: Dict[int, np.ndarray] = {}
    for combo in product(*(sorted(p.items()) for p in pieces)):
        key = sum(m for m, _ in combo)
        key = key % modulus if modulus is not None else key
        mat = np.eye(side, dtype=complex)
        for _, proj in combo:
            mat = mat @ proj.mat
        classes[key] = classes.get(key, 0) + mat
    return [(k, Operator(dims, (m + m.conj().T) / 2, statevec.HERMITIAN)) for k, m in sorted(classes.items())]


def site_coupling_unitary(op_dims: Sequence[int], vectors: np.ndarray, labels: np.ndarray, D: int) -> Operator:
    """sum_m P_m (x) S^-m, with S^-m the dial shift |j> -> |j - m>."""
    side = statevec.dim_product(op_dims)
    mat = np.zeros((side * D, side * D), dtype=complex)
    for m in sorted(set(labels.tolist())):
        v = vectors[:, labels == m]
        mat += np.kron(v @ v.conj().T, np.roll(np.eye(D), -m, axis=0))
    return Operator(tuple(op_dims) + (D,), mat, statevec.UNITARY)


def coupling_unitary(system_dims: Sequence[int], observables: Sequence[Observable], bank: MeterBank,
                     weights: Optional[Sequence[float]] = None, mode: str = SUM) -> Operator:
    """Dense coupling unitary on system (x) meters, meters appended after the system."""
    system_dims = tuple(system_dims)
    couplings = build_couplings(system_dims, observables, bank.spacing, weights=weights, mode=mode)
    dims = system_dims + (bank.D,) * bank.N
    total = Operator.identity(dims)
    for i, c in enumerate(couplings):
        site = site_coupling_unitary(c.dims, c.vectors, c.labels, bank.D)
        total = statevec.embed(site, c.targets + (len(system_dims) + i,), dims) @ total
    return total


def coupled_state(psi: Ket, observables: Sequence[Observable], bank: MeterBank,
                  weights: Optional[Sequence[float]] = None, mode: str = SUM) -> Ket:
    joint = statevec.tensor(psi, bank.state)
    return statevec.apply(coupling_unitary(psi.dims, observables, bank, weights, mode), joint)


def readout_distribution(psi: Ket, observables: Sequence[Observable], bank: MeterBank,
                         order: Optional[Sequence[int]] = None, weights: Optional[Sequence[float]] = None,
                         mode: str = SUM) -> Dict[Tuple[int, ...], float]:
    """Exact joint dial distribution, reading the dials one at a time in `order`.

    Keys are dial labels in meter order; zero-probability readouts are omitted.
    """
    joint = coupled_state(psi, observables, bank, weights, mode)
    n_sys = len(psi.dims)
    order = list(range(bank.N)) if order is None else [int(i) for i in order]
    if sorted(order) != list(range(bank.N)):
        raise PreconditionError(f"readout order {order} is not a permutation of the meters")
    distribution: Dict[Tuple[int, ...], float] = {}

    def read(state: np.ndarray, remaining: List[int], readout: Dict[int, int], probability: float) -> None:
        if not remaining:
            key = tuple(bank.label(readout[i]) for i in range(bank.N))
            distribution[key] = distribution.get(key, 0.0) + probability
            return
        meter = remaining[0]
        for j in range(bank.D):
            branch = np.take(state, [j], axis=n_sys + meter)
            p = float(np.vdot(branch, branch).real)
            if p <= config.PROB_TOL ** 2:
                continue
            collapsed = np.zeros_like(state)
            index = [slice(None)] * state.ndim
            index[n_sys + meter] = j
            collapsed[tuple(index)] = state[tuple(index)] / np.sqrt(p)
            read(collapsed, remaining[1:], {**readout, meter: j}, probability * p)

    read(joint.tensor, order, {}, 1.0)
    return {k: p for k, p in distribution.items() if p > config.PROB_TOL}
