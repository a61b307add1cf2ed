"""Run configuration: built-in defaults < config file < environment (output dir) < CLI flags."""
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from nonlocal_lab import config
from nonlocal_lab.catalog import parse_angle
from nonlocal_lab.errors import UsageError

OUTPUT_DIR_ENV = 'NONLOCAL_LAB_OUTPUT_DIR'


@dataclass
class RunConfig:
    command: str = 'protocol'
    protocol: Optional[str] = None
    audit: Optional[str] = None
    state: Optional[str] = None
    seed: Optional[int] = None
    trials: int = config.DEFAULT_TRIALS
    max_rounds: int = config.DEFAULT_MAX_ROUNDS
    out: Path = config.OUTPUT_DIR
    format: str = config.DEFAULT_FORMAT
    workers: int = 1
    alpha: Optional[float] = None
    cases: int = config.PV_THEOREM2_CASES
    observable: Optional[str] = None

    def validate(self) -> 'RunConfig':
        if self.trials < 1:
            raise UsageError("trials must be at least 1")
        if self.max_rounds < 1:
            raise UsageError("max_rounds must be at least 1")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")
        if self.cases < 1:
            raise UsageError("cases must be at least 1")
        if self.format not in config.FORMATS:
            raise UsageError(f"format must be one of {config.FORMATS}")
        if self.command == 'protocol' and self.seed is None:
            raise UsageError("a protocol run samples outcomes and needs --seed")
        return self


_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    'protocol': str,
    'audit': str,
    'state': str,
    'seed': int,
    'trials': int,
    'max_rounds': int,
    'out': Path,
    'format': str,
    'workers': int,
    'alpha': parse_angle,
    'cases': int,
    'observable': str,
}


def _convert(key: str, raw: str, origin: str) -> Any:
    if key not in _CONVERTERS:
        raise UsageError(f"{origin}: unknown key '{key}'")
    try:
        return _CONVERTERS[key](raw.strip())
    except ValueError:
        raise UsageError(f"{origin}: bad value for {key}: '{raw.strip()}'") from None


def load_config_file(path: Path) -> Dict[str, Any]:
    """Flat key=value lines; '#' starts a comment, blank lines are skipped."""
    values: Dict[str, Any] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e.strerror}") from None
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        match = config.CONFIG_LINE_PATTERN.fullmatch(line)
        if not match:
            raise UsageError(f"{path}:{number}: expected key=value, got '{line}'")
        key = match['key'].lower()
        values[key] = _convert(key, match['value'], f"{path}:{number}")
    return values


def build_run_config(command: str, cli: Dict[str, Any], config_file: Optional[Path] = None,
                     environ: Optional[Dict[str, str]] = None) -> RunConfig:
    environ = os.environ if environ is None else environ
    merged: Dict[str, Any] = {}
    if config_file is not None:
        merged.update(load_config_file(config_file))
    if environ.get(OUTPUT_DIR_ENV):
        merged['out'] = Path(environ[OUTPUT_DIR_ENV])
    known = {f.name for f in fields(RunConfig)}
    merged.update({k: v for k, v in cli.items() if v is not None and k in known})
    if 'out' in merged:
        merged['out'] = Path(merged['out'])
    return RunConfig(command=command, **{k: v for k, v in merged.items() if k != 'command'}).validate()
