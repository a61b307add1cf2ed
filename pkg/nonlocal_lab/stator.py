"""Stator-based measurement of the twisted product basis.

Alice and Bob share Phi+ ebits (a_k, b_k). Bob's controlled-sigma_y from b_k
onto B followed by his sigma_x(b_k) readout leaves the stator relation
sigma_x(a_k) ~ +-sigma_y(B), so Alice's rotation of a_k, conditioned on her own
sigma_z(A) result, acts as a rotation of Bob's qubit. When Bob's readout comes
out minus the rotation goes the wrong way and the next ebit corrects it with
twice the angle.
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from nonlocal_lab import config, statevec
from nonlocal_lab.bell import BellKind, EbitPool
from nonlocal_lab.engine import ProtocolResult, ProtocolRun
from nonlocal_lab.errors import PreconditionError, ResourceExhausted
from nonlocal_lab.simple_logger import log
from nonlocal_lab.statevec import Ket, Operator

PLUS, MINUS = '+', '-'
UP, DOWN = 'u', 'd'

# Final (A, B) readouts for each input index under each (nu_a, nu_b) branch.
STATOR_TABLE: Dict[Tuple[str, str], Dict[int, Tuple[str, str]]] = {
    (PLUS, PLUS): {1: (UP, UP), 2: (UP, DOWN), 3: (DOWN, UP), 4: (DOWN, DOWN)},
    (PLUS, MINUS): {1: (UP, UP), 2: (UP, DOWN), 3: (DOWN, DOWN), 4: (DOWN, UP)},
    (MINUS, PLUS): {1: (UP, DOWN), 2: (UP, UP), 3: (DOWN, DOWN), 4: (DOWN, UP)},
    (MINUS, MINUS): {1: (UP, DOWN), 2: (UP, UP), 3: (DOWN, UP), 4: (DOWN, DOWN)},
}

_X_EIGENSTATES = [Ket((2,), np.array([1, 1]) / np.sqrt(2)), Ket((2,), np.array([1, -1]) / np.sqrt(2))]
_FLIP = {UP: DOWN, DOWN: UP}
_SIGNS = [PLUS, MINUS]
_SPINS = [UP, DOWN]


def twisted_basis(alpha: float = np.pi / 2) -> List[Ket]:
    """|uu>, |ud>, |d>(c|u> + s|d>), |d>(s|u> - c|d>) with c, s = cos, sin(alpha / 2)."""
    c, s = np.cos(alpha / 2), np.sin(alpha / 2)
    up, down = statevec.UP, statevec.DOWN
    return [
        Ket((2, 2), np.kron(up, up)),
        Ket((2, 2), np.kron(up, down)),
        Ket((2, 2), np.kron(down, c * up + s * down)),
        Ket((2, 2), np.kron(down, s * up - c * down)),
    ]


def identify(nu_a: str, nu_b: str, final_a: str, final_b: str) -> int:
    """Invert the stator table: which input produces these readouts in this branch."""
    for index, cell in STATOR_TABLE[(nu_a, nu_b)].items():
        if cell == (final_a, final_b):
            return index
    raise PreconditionError(f"no input reads ({final_a}, {final_b}) in branch ({nu_a}, {nu_b})")


def published_table_cell(nu_a: str, nu_b: str, index: int) -> Tuple[str, str]:
    """The same table with Alice's ebit sign reversed and her system spin labelled the other way up."""
    final_a, final_b = STATOR_TABLE[(_SIGNS[1 - _SIGNS.index(nu_a)], nu_b)][index]
    return _FLIP[final_a], final_b


def _controlled_sigma_y() -> Operator:
    return statevec.controlled(2, 1, statevec.pauli('y'))


def _alice_rotation(theta: float) -> Operator:
    """exp(i theta sigma_x)."""
    return statevec.rotation('x', -2 * theta)


def _bob_round(run: ProtocolRun, k: int) -> str:
    """Couple ebit k to B, read sigma_x(b_k) and drop b_k."""
    b = f"b{k}"
    run.op('B', _controlled_sigma_y(), [b, 'B'], 'controlled_sigma_y')
    projectors = [statevec.projector(v) for v in _X_EIGENSTATES]
    outcome = run.measure('B', [b], projectors, f"nu_b{k}", 'measure_x', values=_SIGNS)
    run.discard('B', [b], _X_EIGENSTATES[outcome])
    return _SIGNS[outcome]


def _check_pool(pool: EbitPool) -> None:
    if pool.kind != BellKind.PHI_PLUS:
        raise PreconditionError("the stator needs Phi+ ebits")


def gr_twisted_basis_measure(psi: Ket, pool: EbitPool, rng) -> ProtocolResult:
    if psi.dims != (2, 2):
        raise PreconditionError(f"expected qubits A, B; got dims {list(psi.dims)}")
    _check_pool(pool)
    if pool.available < 1:
        raise ResourceExhausted("the twisted-basis measurement needs one ebit")
    run = ProtocolRun('gr_twisted', psi, ['A', 'B'], {'A': 'A', 'B': 'B'}, rng, pool)
    run.share_pair('A', 'a1', 'B', 'b1')

    nu_b = _bob_round(run, 1)
    spin_a = _SPINS[run.measure_basis('A', 'A', 'A', values=_SPINS)]
    if spin_a == DOWN:
        run.op('A', _alice_rotation(np.pi / 4), ['a1'], 'conditional_rotation', depends_on=['A'])
    nu_a = _SIGNS[run.measure_basis('A', 'a1', 'nu_a1', label='measure_z', values=_SIGNS)]
    spin_b = _SPINS[run.measure_basis('B', 'B', 'B', values=_SPINS)]

    run.gather('A', ['nu_b1', 'B'])
    index = identify(nu_a, nu_b, spin_a, spin_b)
    run.announce('A', 'eigenstate', index, ['A', 'nu_a1', 'nu_b1', 'B'])
    return run.result(index, 'destroyed', details={'branch': [nu_a, nu_b], 'final': [spin_a, spin_b]})


def resolves(alpha: float, k: int) -> bool:
    """After a minus in round k the residual rotation 2^k alpha is a multiple of pi."""
    x = float(np.mod(2.0 ** k * alpha, np.pi))
    return min(x, np.pi - x) < config.LATTICE_TOL


def residual_flip(alpha: float, k: int) -> bool:
    x = float(np.mod(2.0 ** (k - 1) * alpha, np.pi))
    return abs(x - np.pi / 2) < config.LATTICE_TOL


def gr_general_angle_measure(psi: Ket, alpha: float, pool: EbitPool, max_rounds: int = config.DEFAULT_MAX_ROUNDS,
                             rng=None) -> ProtocolResult:
    """Repeat-until-success twisted-basis measurement at a general twist angle.

    Round k rotates by theta_k = 2^(k-2) alpha. Bob couples ebit k only while
    no earlier round resolved; Alice, who cannot know which round did, rotates
    and reads every ebit she holds.
    """
    if psi.dims != (2, 2):
        raise PreconditionError(f"expected qubits A, B; got dims {list(psi.dims)}")
    _check_pool(pool)
    if max_rounds < 1:
        raise PreconditionError("max_rounds must be at least 1")
    run = ProtocolRun('gr_general_angle', psi, ['A', 'B'], {'A': 'A', 'B': 'B'}, rng, pool)

    rounds = min(max_rounds, pool.available)
    coupled: List[int] = []
    resolved_at: Optional[int] = None
    flip = False
    for k in range(1, rounds + 1):
        if resolved_at is not None:
            break
        run.share_pair('A', f"a{k}", 'B', f"b{k}")
        coupled.append(k)
        nu_b = _bob_round(run, k)
        if nu_b == PLUS or resolves(alpha, k):
            resolved_at = k
            flip = nu_b == MINUS and residual_flip(alpha, k)
    idle = rounds - len(coupled)
    idle_nu_a = []
    if idle:
        pool.draw(idle)
        idle_nu_a = [_SIGNS[run.chooser.choose([0.5, 0.5], 'idle')] for _ in range(idle)]

    spin_a = _SPINS[run.measure_basis('A', 'A', 'A', values=_SPINS)]
    nu_a: Dict[int, str] = {}
    for k in coupled:
        if spin_a == DOWN:
            run.op('A', _alice_rotation(2.0 ** (k - 2) * alpha), [f"a{k}"], 'conditional_rotation', depends_on=['A'])
        nu_a[k] = _SIGNS[run.measure_basis('A', f"a{k}", f"nu_a{k}", values=_SIGNS)]
    spin_b = _SPINS[run.measure_basis('B', 'B', 'B', values=_SPINS)]

    bob_records = [f"nu_b{k}" for k in coupled] + ['B']
    run.gather('A', bob_records)
    success = spin_a == UP or resolved_at is not None
    parity = sum(nu_a[k] == MINUS for k in coupled) + (1 if spin_a == DOWN and flip else 0)
    untwisted = spin_b if parity % 2 == 0 else _FLIP[spin_b]
    index: Optional[int] = None
    if success:
        index = (1 if untwisted == UP else 2) if spin_a == UP else (3 if untwisted == UP else 4)
    log('DEBUG', f"gr_general_angle: coupled {len(coupled)} of {rounds} ebits", extras=f"resolved_at={resolved_at}")
    run.announce('A', 'eigenstate', index, ['A'] + [f"nu_a{k}" for k in coupled] + bob_records)
    details: Dict[str, Any] = {'alpha': float(alpha), 'resolved_at': resolved_at, 'idle_nu_a': idle_nu_a}
    return run.result(index, 'destroyed', success=success, rounds=len(coupled), details=details)


def cumulative_success(n: int) -> float:
    """Success probability on the twisted states after n rounds at a generic angle."""
    return 1.0 - 2.0 ** -n
