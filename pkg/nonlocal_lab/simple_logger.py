import sys
from datetime import datetime
from typing import Any, Dict

from nonlocal_lab import config

LEVELS: Dict[str, int] = {'DEBUG': 10, 'INFO': 20, 'SUCCESS': 25, 'WARN': 30, 'ERROR': 40}

_threshold: int = LEVELS.get(config.LOG_LEVEL, LEVELS['INFO'])


def set_level(level: str) -> None:
    global _threshold
    _threshold = LEVELS[level.upper()]


def log(level: str, message: str, extras: Any = None) -> None:
    if LEVELS.get(level, LEVELS['INFO']) < _threshold:
        return
    stamp = datetime.now().strftime('%Y-%m-%d %H:%M:%S.%f')[:-3]
    print(f"[{stamp}] {level:7} :: {message}{f' :: {extras}' if extras else ''}", file=sys.stderr)
