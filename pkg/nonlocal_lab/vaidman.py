"""Nonlocal measurement by repeated partial teleportation.

Teleportation here never applies the Pauli correction: the receiver holds the
state distorted by the Pauli of the Bell outcome, and only the sender knows
which. Alice rotates the eigenbasis of O onto z-product states regardless; if
the incoming distortion happened to be trivial, a z readout completes the
measurement, and otherwise the state is teleported around again on a fresh
channel whose label tells Alice which correction to compose.
"""
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nonlocal_lab import config, statevec
from nonlocal_lab.bell import BellKind, EbitPool, distortion, pauli_bits
from nonlocal_lab.engine import ProtocolResult, ProtocolRun
from nonlocal_lab.errors import PreconditionError, ResourceExhausted
from nonlocal_lab.simple_logger import log
from nonlocal_lab.statevec import Ket, Operator


def eigensystem(O: Operator, basis: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, Optional[float]]:
    """(eigenvalues, eigenvector columns, constant) of an observable.

    A multiple of the identity comes back as its constant. Any other degenerate
    observable needs an explicit eigenbasis.
    """
    if not O.is_hermitian():
        raise PreconditionError("the measured observable must be Hermitian")
    side = O.mat.shape[0]
    scale = float(np.trace(O.mat).real) / side
    if np.allclose(O.mat, scale * np.eye(side), atol=config.LATTICE_TOL, rtol=0):
        return np.full(side, scale), np.eye(side, dtype=complex), scale
    if basis is None:
        values, vectors = np.linalg.eigh(O.mat)
        if np.min(np.diff(values)) < config.LATTICE_TOL:
            raise PreconditionError("degenerate observable: supply an eigenbasis")
        return values, vectors, None
    vectors = np.asarray(basis, dtype=complex)
    if vectors.shape != (side, side) or not np.allclose(vectors.conj().T @ vectors, np.eye(side),
                                                          atol=config.UNITARY_TOL, rtol=0):
        raise PreconditionError("supplied eigenbasis is not orthonormal")
    values = np.einsum('ij,ik,kj->j', vectors.conj(), O.mat, vectors).real
    if not np.allclose(O.mat @ vectors, vectors * values, atol=config.LATTICE_TOL, rtol=0):
        raise PreconditionError("supplied basis does not diagonalise the observable")
    return values, vectors, None


def _pauli_string(kinds: Sequence[BellKind]) -> Operator:
    return statevec.tensor_all([distortion(k) for k in kinds])


def _flips(kinds: Sequence[BellKind]) -> List[int]:
    return [pauli_bits(k)[0] for k in kinds]


def _trivial(kinds: Sequence[BellKind]) -> bool:
    return all(k == BellKind.PSI_MINUS for k in kinds)


def _same_pauli(a: Sequence[BellKind], b: Sequence[BellKind]) -> bool:
    return all(pauli_bits(x) == pauli_bits(y) for x, y in zip(a, b))


def _label(kinds: Sequence[BellKind]) -> str:
    return ','.join(k.value for k in kinds)


def _decode(bits: Sequence[int]) -> int:
    return int(''.join(str(b) for b in bits), 2)


def partial_teleport(psi: Ket, source_qubits: Sequence[int], pool: EbitPool, rng) -> Tuple[List[BellKind], Ket]:
    """Teleport each source qubit through a singlet without correcting it.

    The post-state keeps the input layout, with every teleported qubit now held
    at the destination and distorted by the Pauli of its Bell outcome.
    """
    result = partial_teleport_protocol(psi, pool, rng, source_qubits)
    return [BellKind(k) for k in result.inferred_value], result.post_state


def partial_teleport_protocol(psi: Ket, pool: EbitPool, rng, source_qubits: Optional[Sequence[int]] = None
                              ) -> ProtocolResult:
    sources = list(range(len(psi.dims))) if source_qubits is None else [int(q) for q in source_qubits]
    if pool.available < len(sources):
        raise ResourceExhausted(f"partial teleportation of {len(sources)} qubits needs as many ebits")
    names = [f"q{i}" for i in range(len(psi.dims))]
    owners = {n: ('B' if i in sources else 'A') for i, n in enumerate(names)}
    run = ProtocolRun('partial_teleport', psi, names, owners, rng, pool)
    outcomes = [run.teleport('B', 'A', names[q], f"n.{names[q]}") for q in sources]
    return run.result([k.value for k in outcomes], run.register.ordered(names))


def _success_result(run: ProtocolRun, reader: str, logical: List[str], flips: List[int], values: np.ndarray,
                    rounds: int, depends_on: List[str], remote: List[str]) -> ProtocolResult:
    z = [run.measure_basis(reader, q, f"z.{q}", depends_on=depends_on) for q in logical]
    run.gather(reader, remote)
    index = _decode([zi ^ f for zi, f in zip(z, flips)])
    value = float(values[index])
    run.announce(reader, 'eigenvalue', value, [f"z.{q}" for q in logical] + remote)
    return run.result(value, run.register.ordered(logical), rounds=rounds, details={'eigen_index': index})


def vaidman_bipartite_measure(psi: Ket, O: Operator, K: int, pool: EbitPool,
                              max_rounds: int = config.DEFAULT_MAX_ROUNDS, rng=None,
                              basis: Optional[np.ndarray] = None) -> ProtocolResult:
    dims = (2,) * (2 * K)
    if psi.dims != dims or O.dims != dims:
        raise PreconditionError(f"expected {2 * K} qubits for K={K}")
    values, vectors, constant = eigensystem(O, basis)
    alice = [f"A{i + 1}" for i in range(K)]
    bob = [f"B{i + 1}" for i in range(K)]
    logical = alice + bob
    run = ProtocolRun('vaidman_bipartite', psi, logical, {**{a: 'A' for a in alice}, **{b: 'B' for b in bob}},
                      rng, pool)
    if constant is not None:
        run.announce('B', 'eigenvalue', constant, [])
        return run.result(constant, psi, rounds=1, details={'eigen_index': None})

    W = Operator(dims, vectors.conj().T, statevec.UNITARY)
    U: Optional[Operator] = None
    cluster = 'n'
    bob_records: List[str] = []
    rounds = 0
    for r in range(1, max_rounds + 1):
        need = 3 * K if r == 1 else 4 * K
        if pool.available < need:
            log('DEBUG', f"vaidman_bipartite: pool holds {pool.available} ebits, round {r} needs {need}")
            break
        rounds = r
        if r == 1:
            incoming = [run.teleport('B', 'A', b, f"n.{b}", cluster=cluster) for b in bob]
            bob_records = [f"n.{b}" for b in bob]
            run.op('A', W, logical, 'eigenbasis_to_z')
        else:
            incoming = [run.teleport('B', 'A', q, f"m{r}.{q}", depends_on=bob_records, cluster=cluster)
                        for q in logical]
            bob_records = bob_records + [f"m{r}.{q}" for q in logical]
            run.op('A', W @ U.dagger(), logical, 'undo_and_rotate', depends_on=[f"t{r - 1}.{q}" for q in logical])
        outgoing = [run.teleport('A', 'B', q, f"t{r}.{q}", cluster=cluster) for q in logical]
        alice_records = [f"t{r}.{q}" for q in logical]

        if _trivial(incoming):
            return _success_result(run, 'B', logical, _flips(outgoing), values, r, bob_records, alice_records)
        if r == 1:
            received = statevec.tensor(Operator.identity((2,) * K), _pauli_string(incoming))
            U = _pauli_string(outgoing) @ W @ received
        else:
            U = _pauli_string(outgoing) @ W @ U.dagger() @ _pauli_string(incoming) @ U
        cluster = f"{cluster};{_label(incoming)}"

    run.announce('B', 'eigenvalue', None, bob_records)
    return run.result(None, 'destroyed', success=False, rounds=rounds)


def vaidman_three_party_measure(psi: Ket, O: Operator, pool: EbitPool,
                                max_rounds: int = config.DEFAULT_MAX_ROUNDS, rng=None,
                                basis: Optional[np.ndarray] = None) -> ProtocolResult:
    """Alice, Bob and Collin hold one qubit each.

    Round one: Bob and Collin teleport to Alice, Alice rotates and teleports
    everything to Bob, Bob forwards it to Collin on the channel named by his
    own first outcome. Later rounds go Collin -> Alice -> Bob -> Collin, Bob
    always forwarding on the channel named by his previous outcome, so Collin
    can tell from channel label and own record whether the accumulated
    distortion cancels.
    """
    dims = (2, 2, 2)
    if psi.dims != dims or O.dims != dims:
        raise PreconditionError("the three-party measurement takes one qubit per party")
    values, vectors, constant = eigensystem(O, basis)
    logical = ['A', 'B', 'C']
    run = ProtocolRun('vaidman_three_party', psi, logical, {'A': 'A', 'B': 'B', 'C': 'C'}, rng, pool)
    if constant is not None:
        run.announce('C', 'eigenvalue', constant, [])
        return run.result(constant, psi, rounds=1, details={'eigen_index': None})

    W = Operator(dims, vectors.conj().T, statevec.UNITARY)
    U_A: Optional[Operator] = None
    s_prev: List[BellKind] = []
    cluster = 'n'
    collin_records: List[str] = []
    rounds = 0
    for r in range(1, max_rounds + 1):
        need = 8 if r == 1 else 9
        if pool.available < need:
            log('DEBUG', f"vaidman_three_party: pool holds {pool.available} ebits, round {r} needs {need}")
            break
        rounds = r
        if r == 1:
            n_b = run.teleport('B', 'A', 'B', 'nB', cluster=cluster)
            n_c = run.teleport('C', 'A', 'C', 'nC', cluster=cluster)
            collin_records = ['nC']
            run.op('A', W, logical, 'eigenbasis_to_z')
        else:
            m = [run.teleport('C', 'A', q, f"m{r}.{q}", depends_on=collin_records, cluster=cluster) for q in logical]
            collin_records = collin_records + [f"m{r}.{q}" for q in logical]
            run.op('A', W @ U_A.dagger(), logical, 'undo_and_rotate', depends_on=[f"t{r - 1}.{q}" for q in logical])
        t = [run.teleport('A', 'B', q, f"t{r}.{q}", cluster=cluster) for q in logical]
        bob_channel, bob_held = ([n_b], ['nB']) if r == 1 else (s_prev, [f"s{r - 1}.{q}" for q in logical])
        s = [run.teleport('B', 'C', q, f"s{r}.{q}", depends_on=bob_held, cluster=f"s;{_label(bob_channel)}")
             for q in logical]
        alice_records = [f"t{r}.{q}" for q in logical]
        bob_records = [f"s{r}.{q}" for q in logical]

        if r == 1:
            done = _trivial([n_b, n_c])
        else:
            done = _same_pauli(m, s_prev)
        if done:
            flips = [a ^ b for a, b in zip(_flips(t), _flips(s))]
            return _success_result(run, 'C', logical, flips, values, r, collin_records, alice_records + bob_records)
        if r == 1:
            received = statevec.tensor_all([Operator.identity((2,)), distortion(n_b), distortion(n_c)])
            U_A = _pauli_string(t) @ W @ received
            cluster = f"n;{_label([n_b, n_c])}"
        else:
            E = _pauli_string(m) @ _pauli_string(s_prev)
            U_A = _pauli_string(t) @ W @ U_A.dagger() @ E @ U_A
            cluster = f"{cluster};{_label(m)}/{_label(s_prev)}"
        s_prev = s

    run.announce('C', 'eigenvalue', None, collin_records)
    return run.result(None, 'destroyed', success=False, rounds=rounds)


def success_probability(round_one: float, later: float, max_rounds: int) -> float:
    total, reach = 0.0, 1.0
    for r in range(1, max_rounds + 1):
        p = round_one if r == 1 else later
        total += reach * p
        reach *= 1.0 - p
    return total


def bipartite_success_probability(K: int, max_rounds: int) -> float:
    return success_probability(4.0 ** -K, 16.0 ** -K, max_rounds)


def three_party_success_probability(max_rounds: int) -> float:
    return success_probability(1 / 16, 1 / 64, max_rounds)


def exact_distribution(psi: Ket, O: Operator, p_success: float, basis: Optional[np.ndarray] = None
                       ) -> Dict[Any, float]:
    """Eigenvalue distribution of a partial-teleportation measurement, failures under None."""
    values, vectors, constant = eigensystem(O, basis)
    if constant is not None:
        return {constant: 1.0}
    born = np.abs(vectors.conj().T @ psi.amps) ** 2
    distribution: Dict[Any, float] = {}
    for value, p in zip(values, born):
        if p * p_success > config.PROB_TOL:
            distribution[float(value)] = distribution.get(float(value), 0.0) + float(p) * p_success
    if 1.0 - p_success > config.PROB_TOL:
        distribution[None] = 1.0 - p_success
    return distribution
