from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from nonlocal_lab import statevec
from nonlocal_lab.errors import PreconditionError, ResourceExhausted
from nonlocal_lab.statevec import Ket, Operator


class BellKind(str, Enum):
    PSI_MINUS = 'PsiMinus'
    PSI_PLUS = 'PsiPlus'
    PHI_MINUS = 'PhiMinus'
    PHI_PLUS = 'PhiPlus'


# Outcome index of a Bell measurement is the position in this tuple.
BELL_ORDER: Tuple[BellKind, ...] = (BellKind.PSI_MINUS, BellKind.PSI_PLUS, BellKind.PHI_MINUS, BellKind.PHI_PLUS)

_AMPLITUDES: Dict[BellKind, Tuple[int, int, int, int]] = {
    BellKind.PSI_MINUS: (0, 1, -1, 0),
    BellKind.PSI_PLUS: (0, 1, 1, 0),
    BellKind.PHI_MINUS: (1, 0, 0, -1),
    BellKind.PHI_PLUS: (1, 0, 0, 1),
}

_CORRECTION_AXIS: Dict[BellKind, str] = {
    BellKind.PSI_MINUS: 'i',
    BellKind.PSI_PLUS: 'z',
    BellKind.PHI_MINUS: 'x',
    BellKind.PHI_PLUS: 'y',
}


def make_bell(kind: BellKind) -> Ket:
    return Ket((2, 2), np.array(_AMPLITUDES[BellKind(kind)], dtype=complex) / np.sqrt(2))


def bell_projectors() -> List[Operator]:
    return [statevec.projector(make_bell(kind)) for kind in BELL_ORDER]


def bell_measure(psi: Ket, pair: Sequence[int], rng, label: str = 'bell') -> Tuple[BellKind, Ket]:
    if len(pair) != 2:
        raise PreconditionError("a Bell measurement acts on exactly two subsystems")
    for index in pair:
        if not 0 <= index < len(psi.dims) or psi.dims[index] != 2:
            raise PreconditionError(f"subsystem {index} is not a qubit")
    k, _, post = statevec.measure_projective(psi, bell_projectors(), rng, targets=pair, label=label)
    return BELL_ORDER[k], post


def pauli_correction(kind: BellKind) -> Operator:
    axis = _CORRECTION_AXIS[BellKind(kind)]
    if axis == 'i':
        return Operator.identity((2,))
    return statevec.rotation(axis, np.pi)


def distortion(kind: BellKind) -> Operator:
    """Pauli left on the far half of a singlet channel after this Bell outcome."""
    return statevec.pauli(_CORRECTION_AXIS[BellKind(kind)])


def pauli_bits(kind: BellKind) -> Tuple[int, int]:
    """(x, z) bits of the distortion; x is the computational-basis flip."""
    return {'i': (0, 0), 'z': (0, 1), 'x': (1, 0), 'y': (1, 1)}[_CORRECTION_AXIS[BellKind(kind)]]


@dataclass
class EbitPool:
    available: int
    kind: BellKind = BellKind.PSI_MINUS
    consumed: int = 0

    def __post_init__(self):
        if self.available < 0:
            raise PreconditionError("an ebit pool cannot start negative")
        self.kind = BellKind(self.kind)

    @property
    def total(self) -> int:
        return self.available + self.consumed

    def draw(self, count: int = 1) -> Ket:
        if count > self.available:
            raise ResourceExhausted(f"needed {count} ebits, {self.available} left")
        self.available -= count
        self.consumed += count
        return statevec.tensor_all([make_bell(self.kind)] * count)

    def to_json(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'consumed': self.consumed, 'available': self.available}
