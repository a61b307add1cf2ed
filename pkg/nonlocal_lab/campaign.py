"""Monte Carlo campaigns: many seeded trials of one protocol against its exact distribution."""
import multiprocessing as mp
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from nonlocal_lab import catalog
from nonlocal_lab.catalog import RunOptions
from nonlocal_lab.engine import ProtocolResult
from nonlocal_lab.simple_logger import log

SIGMA_BOUND = 3.0


@dataclass
class TrialOutcome:
    key: str
    success: bool
    rounds: int
    ebits: int
    messages: int


@dataclass
class CampaignResult:
    protocol: str
    state: str
    trials: int
    seed: int
    first: ProtocolResult
    frequencies: pd.DataFrame
    accuracy: Optional[float]
    exact: Dict[str, float]
    outcomes: List[TrialOutcome]

    def summary(self) -> Dict[str, Any]:
        ebits = [o.ebits for o in self.outcomes]
        return {
            'protocol': self.protocol,
            'state': self.state,
            'seed': self.seed,
            'trials': self.trials,
            'success_rate': float(np.mean([o.success for o in self.outcomes])),
            'accuracy': self.accuracy,
            'mean_rounds': float(np.mean([o.rounds for o in self.outcomes])),
            'mean_ebits': float(np.mean(ebits)),
            'all_within_3sigma': bool(self.frequencies['within_3sigma'].all()),
            'first_trial': self.first.summary(),
        }


def trial_seeds(seed: int, trials: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)


def _options_for(state: catalog.NamedState, options: RunOptions) -> RunOptions:
    if options.alpha is None and state.alpha is not None:
        return RunOptions(options.max_rounds, state.alpha, options.observable)
    return options


def run_once(protocol: str, state_spec: str, options: RunOptions, seed_seq) -> ProtocolResult:
    state = catalog.parse_state(state_spec)
    entry = catalog.get_protocol(protocol)
    return entry.run(state.ket, np.random.default_rng(seed_seq), _options_for(state, options))


def _trial(job: Tuple[str, str, RunOptions, np.random.SeedSequence]) -> TrialOutcome:
    result = run_once(*job)
    return TrialOutcome(catalog.outcome_key(result), result.success, result.resources['rounds'],
                        result.resources['ebits_consumed'], result.resources['messages'])


def within_bound(count: int, trials: int, p: float) -> bool:
    sigma = np.sqrt(trials * p * (1.0 - p))
    return abs(count - trials * p) <= SIGMA_BOUND * sigma + 1e-9


def expected_outcome(exact: Dict[str, float]) -> Optional[str]:
    """The one outcome a successful run can report, if the input fixes it."""
    keys = [k for k, p in exact.items() if k != catalog.FAILURE and p > 0]
    return keys[0] if len(keys) == 1 else None


def frequency_table(outcomes: List[TrialOutcome], exact: Dict[str, float], accuracy: Optional[float]) -> pd.DataFrame:
    trials = len(outcomes)
    counts: Dict[str, int] = {}
    for o in outcomes:
        counts[o.key] = counts.get(o.key, 0) + 1
    rows = []
    for key in sorted(set(counts) | set(exact)):
        count, p = counts.get(key, 0), exact.get(key, 0.0)
        rows.append({
            'outcome': key,
            'count': count,
            'empirical': count / trials,
            'exact': p,
            'within_3sigma': within_bound(count, trials, p),
            'accuracy': accuracy if accuracy is not None else np.nan,
        })
    return pd.DataFrame(rows, columns=['outcome', 'count', 'empirical', 'exact', 'within_3sigma', 'accuracy'])


def run_campaign(protocol: str, state_spec: str, seed: int, trials: int, options: Optional[RunOptions] = None,
                 workers: int = 1) -> CampaignResult:
    options = options or RunOptions()
    entry = catalog.get_protocol(protocol)
    state = catalog.parse_state(state_spec)
    seeds = trial_seeds(seed, trials)
    jobs = [(protocol, state_spec, options, s) for s in seeds]

    first = run_once(*jobs[0])
    if workers > 1 and trials > 1:
        with mp.Pool(processes=workers) as pool:
            outcomes = pool.map(_trial, jobs, chunksize=max(1, trials // (4 * workers)))
    else:
        outcomes = [_trial(job) for job in jobs]

    exact = entry.exact_distribution(state.ket, _options_for(state, options))
    expected = expected_outcome(exact)
    accuracy = None
    if expected is not None:
        successes = [o for o in outcomes if o.success]
        if successes:
            accuracy = sum(o.key == expected for o in successes) / len(successes)
    frequencies = frequency_table(outcomes, exact, accuracy)
    log('INFO', f"{protocol}: {trials} trials on {state_spec}",
        extras=f"outcomes={len(frequencies)} accuracy={accuracy}")
    return CampaignResult(protocol, state_spec, trials, seed, first, frequencies, accuracy, exact, outcomes)
