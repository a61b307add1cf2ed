"""Dense state vectors and operators over composite finite-dimensional systems.

Conventions: hbar = 1, subsystem 0 is the slowest-varying index, and within a
qubit the up state (index 0) precedes down.
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from nonlocal_lab import config
from nonlocal_lab.branching import as_chooser
from nonlocal_lab.errors import InvariantBreach, PreconditionError

HERMITIAN = 'hermitian'
UNITARY = 'unitary'
GENERAL = 'general'
KINDS = (HERMITIAN, UNITARY, GENERAL)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)

SIGMA: Dict[str, np.ndarray] = {
    'i': np.eye(2, dtype=complex),
    'x': np.array([[0, 1], [1, 0]], dtype=complex),
    'y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'z': np.array([[1, 0], [0, -1]], dtype=complex),
}


def dim_product(dims: Sequence[int]) -> int:
    total = 1
    for d in dims:
        total *= int(d)
    return total


def _check_dims(dims: Sequence[int]) -> Tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 2 for d in dims):
        raise PreconditionError(f"subsystem dimensions must be >= 2, got {list(dims)}")
    if dim_product(dims) > config.MAX_TOTAL_DIM:
        raise PreconditionError(f"total dimension {dim_product(dims)} exceeds {config.MAX_TOTAL_DIM}")
    return dims


def _encode_complex(values: np.ndarray) -> List[List[float]]:
    return [[float(v.real), float(v.imag)] for v in np.asarray(values).reshape(-1)]


def _decode_complex(pairs: Sequence[Sequence[float]]) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


@dataclass(frozen=True, eq=False)
class Ket:
    dims: Tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size != dim_product(dims):
            raise PreconditionError(f"{amps.size} amplitudes do not fit dims {list(dims)}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > config.NORM_INPUT_TOL:
            raise PreconditionError(f"ket is not normalised (norm {norm:.3e})")
        amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'amps', amps)

    @classmethod
    def unit(cls) -> 'Ket':
        """The scalar-1 ket with no subsystems; the identity of tensor()."""
        return cls((), np.ones(1, dtype=complex))

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex], dims: Optional[Sequence[int]] = None) -> 'Ket':
        """Normalise an arbitrary nonzero vector. Qubit dims are inferred for power-of-two lengths."""
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm < config.NORM_TOL:
            raise PreconditionError("cannot normalise a zero vector")
        if dims is None:
            n = amps.size.bit_length() - 1
            dims = (2,) * n if amps.size == 2 ** n and n > 0 else (amps.size,)
        return cls(tuple(dims), amps / norm)

    @property
    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.dims) if self.dims else self.amps.reshape(())

    @property
    def total_dim(self) -> int:
        return self.amps.size

    def inner(self, other: 'Ket') -> complex:
        if self.dims != other.dims:
            raise PreconditionError(f"dims differ: {list(self.dims)} vs {list(other.dims)}")
        return complex(np.vdot(self.amps, other.amps))

    def to_json(self) -> Dict[str, Any]:
        return {'dims': list(self.dims), 'amps': _encode_complex(self.amps)}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> 'Ket':
        return cls(tuple(data['dims']), _decode_complex(data['amps']))


@dataclass(frozen=True, eq=False)
class Operator:
    dims: Tuple[int, ...]
    mat: np.ndarray
    kind: str = GENERAL

    def __post_init__(self):
        dims = _check_dims(self.dims)
        mat = np.array(self.mat, dtype=complex)
        side = dim_product(dims)
        if mat.shape != (side, side):
            raise PreconditionError(f"matrix shape {mat.shape} does not fit dims {list(dims)}")
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown operator kind '{self.kind}'")
        mat.setflags(write=False)
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'mat', mat)
        if self.kind == HERMITIAN and not self.is_hermitian():
            raise PreconditionError("operator tagged hermitian is not Hermitian")
        if self.kind == UNITARY and not self.is_unitary():
            raise PreconditionError("operator tagged unitary is not unitary")

    def is_hermitian(self, tol: float = config.OPERATOR_TOL) -> bool:
        return bool(np.allclose(self.mat, self.mat.conj().T, atol=tol, rtol=0))

    def is_unitary(self, tol: float = config.UNITARY_TOL) -> bool:
        eye = np.eye(self.mat.shape[0])
        return bool(np.allclose(self.mat @ self.mat.conj().T, eye, atol=tol, rtol=0))

    def dagger(self) -> 'Operator':
        return Operator(self.dims, self.mat.conj().T, self.kind)

    def __matmul__(self, other: 'Operator') -> 'Operator':
        if self.dims != other.dims:
            raise PreconditionError(f"dims differ: {list(self.dims)} vs {list(other.dims)}")
        kind = UNITARY if self.kind == UNITARY and other.kind == UNITARY else GENERAL
        return Operator(self.dims, self.mat @ other.mat, kind)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> 'Operator':
        return cls(tuple(dims), np.eye(dim_product(dims), dtype=complex), UNITARY)

    def to_json(self) -> Dict[str, Any]:
        return {'dims': list(self.dims), 'kind': self.kind, 'mat': _encode_complex(self.mat)}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> 'Operator':
        side = dim_product(data['dims'])
        return cls(tuple(data['dims']), _decode_complex(data['mat']).reshape(side, side), data.get('kind', GENERAL))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: Tuple[int, ...]
    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        if not np.allclose(mat, mat.conj().T, atol=config.NORM_TOL, rtol=0):
            raise InvariantBreach("density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > config.PSD_TOL:
            raise InvariantBreach(f"density matrix trace {np.trace(mat).real:.3e} != 1")
        if np.linalg.eigvalsh(mat).min() < -config.PSD_TOL:
            raise InvariantBreach("density matrix has a negative eigenvalue")
        mat.setflags(write=False)
        object.__setattr__(self, 'mat', mat)
        object.__setattr__(self, 'dims', tuple(self.dims))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.mat)

    def purity(self) -> float:
        return float(np.trace(self.mat @ self.mat).real)


@dataclass(frozen=True, eq=False)
class SchmidtForm:
    coeffs: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    left: Tuple[int, ...]
    right: Tuple[int, ...]
    dims: Tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.coeffs)

    def reconstruct(self) -> Ket:
        matrix = self.left_basis @ np.diag(self.coeffs) @ self.right_basis.T
        order = list(self.left) + list(self.right)
        shaped = matrix.reshape([self.dims[i] for i in order])
        return Ket(self.dims, np.transpose(shaped, np.argsort(order)).reshape(-1))


# Operator constructors

def pauli(axis: str) -> Operator:
    return Operator((2,), SIGMA[axis], UNITARY)


def spin(axis: str) -> Operator:
    return Operator((2,), SIGMA[axis] / 2, HERMITIAN)


def rotation(axis: str, angle: float) -> Operator:
    """exp(-i angle sigma_axis / 2); rotation(k, pi) = -i sigma_k."""
    return Operator((2,), expm(-0.5j * angle * SIGMA[axis]), UNITARY)


def basis_ket(dims: Sequence[int], index: Sequence[int]) -> Ket:
    dims = tuple(dims)
    amps = np.zeros(dim_product(dims), dtype=complex)
    amps[np.ravel_multi_index(tuple(index), dims)] = 1.0
    return Ket(dims, amps)


def projector(ket: Ket) -> Operator:
    return Operator(ket.dims, np.outer(ket.amps, ket.amps.conj()), HERMITIAN)


def projector_onto(dims: Sequence[int], vectors: Sequence[np.ndarray]) -> Operator:
    """Projector onto the span of orthonormal column vectors."""
    side = dim_product(dims)
    mat = np.zeros((side, side), dtype=complex)
    for v in vectors:
        v = np.asarray(v, dtype=complex).reshape(-1)
        mat += np.outer(v, v.conj())
    return Operator(tuple(dims), mat, HERMITIAN)


def controlled(control_dim: int, control_value: int, op: Operator) -> Operator:
    """Apply op to the target when the control subsystem sits in control_value."""
    blocks = np.zeros((control_dim, control_dim), dtype=complex)
    blocks[control_value, control_value] = 1.0
    rest = np.eye(control_dim, dtype=complex) - blocks
    mat = np.kron(rest, np.eye(op.mat.shape[0])) + np.kron(blocks, op.mat)
    kind = UNITARY if op.kind == UNITARY else GENERAL
    return Operator((control_dim,) + op.dims, mat, kind)


def hermitian_from_spectrum(dims: Sequence[int], vectors: np.ndarray, values: Sequence[float]) -> Operator:
    mat = vectors @ np.diag(np.asarray(values, dtype=float)) @ vectors.conj().T
    return Operator(tuple(dims), (mat + mat.conj().T) / 2, HERMITIAN)


# Composition

def tensor(a, b):
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(a.dims + b.dims, np.kron(a.amps, b.amps))
    if isinstance(a, Operator) and isinstance(b, Operator):
        kind = a.kind if a.kind == b.kind else GENERAL
        return Operator(a.dims + b.dims, np.kron(a.mat, b.mat), kind)
    raise PreconditionError("tensor() needs two kets or two operators")


def tensor_all(items: Sequence):
    if not items:
        return Ket.unit()
    result = items[0]
    for item in items[1:]:
        result = tensor(result, item)
    return result


def _check_targets(targets: Sequence[int], dims: Sequence[int]) -> Tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if not targets:
        raise PreconditionError("no target subsystems given")
    if len(set(targets)) != len(targets):
        raise PreconditionError(f"repeated target subsystem in {list(targets)}")
    for t in targets:
        if not 0 <= t < len(dims):
            raise PreconditionError(f"subsystem index {t} out of range for {len(dims)} subsystems")
    return targets


def _apply_matrix(mat: np.ndarray, op_dims: Sequence[int], state: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Contract a matrix acting on op_dims into the target axes of a shaped tensor."""
    k = len(targets)
    op = mat.reshape(tuple(op_dims) + tuple(op_dims))
    moved = np.tensordot(op, state, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(moved, list(range(k)), list(targets))


def embed(op: Operator, targets: Sequence[int], dims: Sequence[int]) -> Operator:
    dims = tuple(dims)
    targets = _check_targets(targets, dims)
    expected = tuple(dims[t] for t in targets)
    if op.dims != expected:
        raise PreconditionError(f"operator dims {list(op.dims)} do not match target dims {list(expected)}")
    side = dim_product(dims)
    columns = np.eye(side, dtype=complex).reshape(dims + (side,))
    mat = _apply_matrix(op.mat, op.dims, columns, targets).reshape(side, side)
    return Operator(dims, mat, op.kind)


def embed_local(op: Operator, target: int, dims: Sequence[int]) -> Operator:
    return embed(op, [target], dims)


def apply(op: Operator, psi: Ket, targets: Optional[Sequence[int]] = None, renormalize: bool = False) -> Ket:
    targets = tuple(range(len(psi.dims))) if targets is None else _check_targets(targets, psi.dims)
    expected = tuple(psi.dims[t] for t in targets)
    if op.dims != expected:
        raise PreconditionError(f"operator dims {list(op.dims)} do not match target dims {list(expected)}")
    if op.kind != UNITARY and not op.is_unitary() and not renormalize:
        raise PreconditionError("non-unitary operator applied without renormalize")
    out = _apply_matrix(op.mat, op.dims, psi.tensor, targets).reshape(-1)
    norm = np.linalg.norm(out)
    if renormalize:
        if norm < config.NORM_TOL:
            raise PreconditionError("operator annihilates the state")
        out = out / norm
    return Ket(psi.dims, out)


# Measurement

def _check_projectors(projectors: Sequence[Operator]) -> None:
    if not projectors:
        raise PreconditionError("empty projector set")
    dims = projectors[0].dims
    side = dim_product(dims)
    total = np.zeros((side, side), dtype=complex)
    tol = config.PROJECTOR_TOL
    for i, p in enumerate(projectors):
        if p.dims != dims:
            raise PreconditionError("projectors act on different spaces")
        if not p.is_hermitian(tol):
            raise PreconditionError(f"projector {i} is not Hermitian")
        if not np.allclose(p.mat @ p.mat, p.mat, atol=tol, rtol=0):
            raise PreconditionError(f"projector {i} is not idempotent")
        for j in range(i):
            if not np.allclose(p.mat @ projectors[j].mat, 0, atol=tol, rtol=0):
                raise PreconditionError(f"projectors {j} and {i} are not orthogonal")
        total += p.mat
    if not np.allclose(total, np.eye(side), atol=tol, rtol=0):
        raise PreconditionError("projectors do not sum to identity")


def born_branches(psi: Ket, projectors: Sequence[Operator], targets: Optional[Sequence[int]] = None) -> List[Tuple[float, Optional[np.ndarray]]]:
    """(probability, unnormalised projected amplitudes) for every projector."""
    targets = tuple(range(len(psi.dims))) if targets is None else _check_targets(targets, psi.dims)
    branches = []
    for p in projectors:
        out = _apply_matrix(p.mat, p.dims, psi.tensor, targets).reshape(-1)
        branches.append((float(np.vdot(out, out).real), out))
    return branches


def measure_projective(psi: Ket, projectors: Sequence[Operator], rng, targets: Optional[Sequence[int]] = None,
                       label: str = 'outcome') -> Tuple[int, float, Ket]:
    _check_projectors(projectors)
    branches = born_branches(psi, projectors, targets)
    probabilities = np.array([p for p, _ in branches])
    k = as_chooser(rng).choose(probabilities, label)
    p, out = branches[k]
    if p <= config.PROB_TOL:
        raise InvariantBreach(f"zero-probability branch {k} drawn")
    return k, p, Ket(psi.dims, out / np.sqrt(p))


def computational_projectors(dim: int) -> List[Operator]:
    return [projector(basis_ket((dim,), (i,))) for i in range(dim)]


def eigenprojectors(op: Operator, tol: float = config.LATTICE_TOL) -> List[Tuple[float, Operator]]:
    """Group eigenvectors of a Hermitian operator into (value, projector) pairs, ascending."""
    if not op.is_hermitian():
        raise PreconditionError("eigenprojectors need a Hermitian operator")
    values, vectors = np.linalg.eigh(op.mat)
    groups: List[Tuple[float, List[int]]] = []
    for i, v in enumerate(values):
        if groups and abs(v - groups[-1][0]) <= tol:
            groups[-1][1].append(i)
        else:
            groups.append((float(v), [i]))
    return [(value, projector_onto(op.dims, vectors[:, idx].T)) for value, idx in groups]


# State analysis

def reduced_density(psi: Ket, keep: Sequence[int]) -> DensityMatrix:
    keep = _check_targets(keep, psi.dims)
    rest = [i for i in range(len(psi.dims)) if i not in keep]
    kept_dim = dim_product([psi.dims[i] for i in keep])
    matrix = np.transpose(psi.tensor, list(keep) + rest).reshape(kept_dim, -1)
    return DensityMatrix(tuple(psi.dims[i] for i in keep), matrix @ matrix.conj().T)


def schmidt_canonical(psi: Ket, left: Sequence[int]) -> SchmidtForm:
    left = _check_targets(left, psi.dims)
    right = tuple(i for i in range(len(psi.dims)) if i not in left)
    if not right:
        raise PreconditionError("bipartition leaves the right group empty")
    dl = dim_product([psi.dims[i] for i in left])
    matrix = np.transpose(psi.tensor, list(left) + list(right)).reshape(dl, -1)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    keep = np.where(s > config.SCHMIDT_CUTOFF)[0]
    u, s, v = u[:, keep], s[keep], vh[keep, :].T

    def first_index(col: np.ndarray) -> int:
        return int(np.argmax(np.abs(col) > config.SCHMIDT_CUTOFF ** 0.5))

    # descending coefficients; equal ones ordered by their left vector's leading index
    rounded = np.round(s, 10)
    order = sorted(range(len(s)), key=lambda i: (-rounded[i], first_index(u[:, i])))
    u, s, v = u[:, order], s[order], v[:, order]
    for i in range(len(s)):
        lead = u[first_index(u[:, i]), i]
        phase = lead / abs(lead)
        u[:, i] *= phase.conjugate()
        v[:, i] *= phase
    return SchmidtForm(s, u, v, left, right, psi.dims)


def expectation(op: Operator, psi: Ket, targets: Optional[Sequence[int]] = None) -> float:
    if not op.is_hermitian():
        raise PreconditionError("expectation needs a Hermitian operator")
    targets = tuple(range(len(psi.dims))) if targets is None else targets
    out = _apply_matrix(op.mat, op.dims, psi.tensor, _check_targets(targets, psi.dims)).reshape(-1)
    value = np.vdot(psi.amps, out)
    if abs(value.imag) > config.PROB_TOL:
        raise InvariantBreach(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def fidelity(a: Ket, b: Ket) -> float:
    return abs(a.inner(b)) ** 2


def equal_up_to_phase(a: Ket, b: Ket, tol: float = config.PHASE_TOL) -> bool:
    return a.dims == b.dims and abs(a.inner(b)) >= 1.0 - tol


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(a.mat - b.mat)).sum())


def factor_out(psi: Ket, targets: Sequence[int], local_state: Ket) -> Ket:
    """Remove target subsystems known to be in local_state, returning the remainder."""
    targets = _check_targets(targets, psi.dims)
    expected = tuple(psi.dims[t] for t in targets)
    if local_state.dims != expected:
        raise PreconditionError(f"local state dims {list(local_state.dims)} do not match {list(expected)}")
    rest = tuple(psi.dims[i] for i in range(len(psi.dims)) if i not in targets)
    out = np.tensordot(local_state.tensor.conj(), psi.tensor, axes=(list(range(len(targets))), list(targets)))
    out = out.reshape(-1)
    if abs(np.linalg.norm(out) - 1.0) > config.NORM_INPUT_TOL:
        raise InvariantBreach("factored subsystems were not in the stated product state")
    return Ket(rest, out)
