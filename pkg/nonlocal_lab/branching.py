"""Random choices with a pluggable chooser.

Every outcome draw in the library goes through a chooser, so one protocol
implementation serves both seeded Monte Carlo runs and exact enumeration of
the full branch tree.
"""
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from nonlocal_lab import config
from nonlocal_lab.errors import InvariantBreach, PreconditionError, ResourceExhausted


def _validated(probabilities: Sequence[float]) -> np.ndarray:
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise PreconditionError("probabilities must be a nonempty vector")
    if p.min() < -config.PROB_TOL:
        raise InvariantBreach(f"negative probability {p.min():.3e}")
    if abs(p.sum() - 1.0) > 1e-8:
        raise InvariantBreach(f"probabilities sum to {p.sum():.12f}")
    p = np.where(p <= config.PROB_TOL, 0.0, p)
    return p / p.sum()


class BranchChooser:
    def choose(self, probabilities: Sequence[float], label: str = 'outcome') -> int:
        raise NotImplementedError


class RandomChooser(BranchChooser):
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def choose(self, probabilities: Sequence[float], label: str = 'outcome') -> int:
        p = _validated(probabilities)
        cdf = np.cumsum(p)
        k = int(np.searchsorted(cdf, self.rng.random() * cdf[-1], side='right'))
        k = min(k, p.size - 1)
        while p[k] == 0.0:
            k -= 1
        return k


class BranchNeeded(Exception):
    """Raised by ScriptedChooser when a run reaches a choice beyond its script."""

    def __init__(self, probabilities: np.ndarray, label: str):
        super().__init__(label)
        self.probabilities = probabilities
        self.label = label


class ScriptedChooser(BranchChooser):
    def __init__(self, path: Sequence[int], marginalize: Sequence[str] = ()):
        self.path = list(path)
        self.marginalize = set(marginalize)
        self.position = 0
        self.probability = 1.0

    def choose(self, probabilities: Sequence[float], label: str = 'outcome') -> int:
        p = _validated(probabilities)
        if label in self.marginalize:
            return int(np.flatnonzero(p > 0)[0])
        if self.position == len(self.path):
            raise BranchNeeded(p, label)
        k = self.path[self.position]
        self.position += 1
        if p[k] == 0.0:
            raise InvariantBreach(f"scripted path forces impossible {label} {k}")
        self.probability *= p[k]
        return k


@dataclass
class Branch:
    path: Tuple[int, ...]
    probability: float
    result: Any


def enumerate_branches(run: Callable[[BranchChooser], Any], marginalize: Sequence[str] = (),
                       max_branches: int = config.MAX_BRANCHES) -> List[Branch]:
    """Run `run(chooser)` once per leaf of the outcome tree, depth first.

    Choices whose label is in `marginalize` are pinned to their first possible
    value and excluded from the path; use it only for choices that cannot
    change what the caller inspects.
    """
    branches: List[Branch] = []
    pending: List[Tuple[int, ...]] = [()]
    while pending:
        path = pending.pop()
        chooser = ScriptedChooser(path, marginalize)
        try:
            result = run(chooser)
        except BranchNeeded as need:
            options = np.flatnonzero(need.probabilities > 0)
            pending.extend(path + (int(k),) for k in reversed(options))
            continue
        branches.append(Branch(path, chooser.probability, result))
        if len(branches) > max_branches:
            raise ResourceExhausted(f"branch tree exceeds {max_branches} leaves")
    total = sum(b.probability for b in branches)
    if abs(total - 1.0) > config.SIGNAL_TOL:
        raise InvariantBreach(f"branch probabilities sum to {total:.12f}")
    return branches


def outcome_distribution(branches: Sequence[Branch], key: Callable[[Any], Hashable]) -> Dict[Hashable, float]:
    distribution: Dict[Hashable, float] = {}
    for branch in branches:
        k = key(branch.result)
        distribution[k] = distribution.get(k, 0.0) + branch.probability
    return distribution


def as_chooser(rng: Optional[Any]) -> BranchChooser:
    if isinstance(rng, BranchChooser):
        return rng
    if isinstance(rng, np.random.Generator):
        return RandomChooser(rng)
    if isinstance(rng, (int, np.integer)) or rng is None:
        return RandomChooser(np.random.default_rng(rng))
    raise PreconditionError(f"cannot draw outcomes from {type(rng).__name__}")
