"""Artifact writers. Everything is validated against its schema first and written deterministically."""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from nonlocal_lab import config, schemas
from nonlocal_lab.transcript import Transcript

FLOAT_FORMAT = '{:.10f}'

FREQUENCY_FORMATS: Dict[str, str] = {
    'empirical': FLOAT_FORMAT,
    'exact': FLOAT_FORMAT,
    'accuracy': FLOAT_FORMAT,
}

PHI_SCAN_FORMATS: Dict[str, str] = {
    'phi': FLOAT_FORMAT,
    'phi_over_pi': FLOAT_FORMAT,
    'max_deviation': '{:.3e}',
}


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serialisable")


def to_plain(document: Any) -> Any:
    """Round-trip through JSON so numpy scalars become Python values before validation."""
    return json.loads(json.dumps(document, default=_plain))


def dumps(document: Any) -> str:
    return json.dumps(document, sort_keys=True, indent=2, default=_plain) + '\n'


def _apply_column_formats(df: pd.DataFrame, format_map: Dict[str, str]) -> pd.DataFrame:
    df_copy = df.copy()
    for col, fmt in format_map.items():
        if col in df_copy.columns:
            def format_cell(x, fmt=fmt):
                if pd.notnull(x):
                    formatted = fmt.format(x)
                    return '0.0' if formatted == FLOAT_FORMAT.format(0) else formatted
                return x

            df_copy[col] = df_copy[col].apply(format_cell)
    return df_copy


def table_csv(df: pd.DataFrame, format_map: Dict[str, str]) -> str:
    return _apply_column_formats(df, format_map).to_csv(index=False, lineterminator='\n')


def _json_text(document: Dict[str, Any], schema_name: str) -> str:
    plain = to_plain(document)
    schemas.validate(plain, schema_name)
    return dumps(plain)


def _transcript_text(transcript: Transcript) -> str:
    lines: List[str] = []
    for event in transcript.events:
        plain = to_plain(event.to_json())
        schemas.validate(plain, 'transcript_event')
        lines.append(json.dumps(plain, sort_keys=True))
    return ''.join(line + '\n' for line in lines)


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding='utf-8')
    return path


def _write_all(pending: List[Tuple[Path, str]]) -> List[Path]:
    return [_write_text(path, text) for path, text in pending]


def write_json(path: Path, document: Dict[str, Any], schema_name: str) -> Path:
    return _write_text(path, _json_text(document, schema_name))


def write_protocol_artifacts(out: Path, summary: Dict[str, Any], transcript: Transcript,
                             frequencies: Optional[pd.DataFrame]) -> List[Path]:
    """Render and validate the whole set before the first file is written."""
    pending = [
        (out / config.TRANSCRIPT_FILENAME, _transcript_text(transcript)),
        (out / config.SUMMARY_FILENAME, _json_text(summary, 'summary')),
    ]
    if frequencies is not None:
        pending.append((out / config.FREQUENCY_FILENAME, table_csv(frequencies, FREQUENCY_FORMATS)))
    return _write_all(pending)


def write_audit_artifacts(out: Path, report: Dict[str, Any], table: Optional[pd.DataFrame]) -> List[Path]:
    pending = [(out / config.REPORT_FILENAME, _json_text(report, 'report'))]
    if table is not None and report.get('audit') == 'phi_scan':
        pending.append((out / config.PHI_SCAN_FILENAME, table_csv(table, PHI_SCAN_FORMATS)))
    return _write_all(pending)
