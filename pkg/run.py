import argparse
import shutil
import sys
from dotenv import load_dotenv
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

load_dotenv()

from nonlocal_lab import artifacts, campaign, catalog, config  # noqa: E402
from nonlocal_lab.catalog import RunOptions  # noqa: E402
from nonlocal_lab.errors import NonlocalLabError, OutputError  # noqa: E402
from nonlocal_lab.run_config import RunConfig, build_run_config  # noqa: E402
from nonlocal_lab.simple_logger import log, set_level  # noqa: E402


def get_separator() -> str:
    try:
        width = shutil.get_terminal_size().columns
        return '-' * width
    except OSError:
        return '-' * 80


def _execute_with_header(title: str, func: Callable, *args: Any, **kwargs: Any) -> Any:
    separator = get_separator()
    print(f'\n{separator}')
    print(title)
    print(separator)
    result = func(*args, **kwargs)
    print(separator)
    return result


def _report_written(paths: List[Path]) -> None:
    for path in paths:
        print(f'📄 Wrote {path}')


def _referenced(entry: Dict[str, Any]) -> str:
    return f"{entry['name']} ({entry['topic']})"


def list_catalog(as_json: bool = False) -> None:
    listing = catalog.catalog()
    if as_json:
        print(artifacts.dumps(listing), end='')
        return
    print('Protocols:')
    for entry in listing['protocols']:
        print(f"  {_referenced(entry):<52} {entry['description']} (default state {entry['default_state']})")
    print('Audits:')
    for entry in listing['audits']:
        print(f"  {_referenced(entry):<52} {entry['description']}")
    print('Named states:')
    for entry in listing['states']:
        print(f"  {entry['spec']:<40} {entry['description']}")
    print(f"Partial-teleportation observables: {', '.join(listing['observables'])}")


def run_protocol(cfg: RunConfig) -> None:
    entry = catalog.get_protocol(cfg.protocol or '')
    state = cfg.state or entry.default_state
    options = RunOptions(cfg.max_rounds, cfg.alpha, cfg.observable)
    print(f'🚀 {entry.name} on {state}: {cfg.trials} trial(s), seed {cfg.seed}')
    result = campaign.run_campaign(entry.name, state, cfg.seed, cfg.trials, options, cfg.workers)
    summary = result.summary()
    frequencies = result.frequencies if cfg.trials > 1 else None
    written = artifacts.write_protocol_artifacts(cfg.out, summary, result.first.transcript, frequencies)
    if cfg.format == 'csv' and frequencies is not None:
        print(artifacts.table_csv(frequencies, artifacts.FREQUENCY_FORMATS), end='')
    else:
        print(artifacts.dumps(summary), end='')
    _report_written(written)
    if result.accuracy is not None and result.accuracy < 1.0:
        print(f'⚠️ Identification accuracy {result.accuracy:.6f}')
    print('✅ Protocol run complete.')


def run_audit(cfg: RunConfig) -> None:
    entry = catalog.get_audit(cfg.audit or '')
    kwargs: Dict[str, Any] = {}
    if 'seed' in entry.options:
        kwargs['seed'] = cfg.seed if cfg.seed is not None else 0
    if 'cases' in entry.options:
        kwargs['cases'] = cfg.cases
    print(f'🔎 Auditing {entry.name}')
    report, table = entry.run(**kwargs)
    written = artifacts.write_audit_artifacts(cfg.out, report, table)
    if cfg.format == 'csv' and table is not None:
        print(artifacts.table_csv(table, artifacts.PHI_SCAN_FORMATS), end='')
    else:
        print(artifacts.dumps(report), end='')
    _report_written(written)
    print('✅ Audit passed.' if report['passed'] else '❌ Audit did not pass.')


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--seed', type=int, help='Master seed; per-trial seeds are spawned from it.')
    parser.add_argument('--out', type=Path, help='Output directory (default: $NONLOCAL_LAB_OUTPUT_DIR or ./outputs).')
    parser.add_argument('--format', choices=config.FORMATS, help='What to echo: the JSON summary or the CSV table.')
    parser.add_argument('--config', type=Path, help='Flat key=value file of defaults.')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Nonlocal measurement protocols and causality audits.')
    parser.add_argument('--log', choices=config.LOG_LEVELS, default=None, help='Minimum log level.')
    subparsers = parser.add_subparsers(dest='command', required=True, help='Available commands')

    catalog_parser = subparsers.add_parser('catalog', help='List protocols, audits and named states.')
    catalog_parser.add_argument('--json', action='store_true', help='Machine-readable catalog.')

    protocol_parser = subparsers.add_parser('protocol', help='Run a protocol campaign.')
    protocol_parser.add_argument('--protocol', help='Protocol name (see catalog).')
    protocol_parser.add_argument('--state', help='Input state spec (see catalog).')
    protocol_parser.add_argument('--trials', type=int, help='Number of seeded trials.')
    protocol_parser.add_argument('--max-rounds', dest='max_rounds', type=int, help='Round limit for repeat-until-success protocols.')
    protocol_parser.add_argument('--alpha', type=catalog.parse_angle, help='Twist angle in radians or pi/n.')
    protocol_parser.add_argument('--observable', choices=catalog.VAIDMAN_OBSERVABLES, help='Observable for partial teleportation.')
    protocol_parser.add_argument('--workers', type=int, help='Worker processes for the trials.')
    _add_shared(protocol_parser)

    audit_parser = subparsers.add_parser('audit', help='Run a causality audit.')
    audit_parser.add_argument('--audit', help='Audit name (see catalog).')
    audit_parser.add_argument('--cases', type=int, help='Random instances for pv_theorems.')
    _add_shared(audit_parser)
    return parser


def _fail(error: NonlocalLabError) -> int:
    log('ERROR', str(error))
    print(f'❌ {error}', file=sys.stderr)
    return error.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log:
        set_level(args.log)

    def configured(command: str) -> RunConfig:
        cli = {k: v for k, v in vars(args).items() if k not in ('command', 'log', 'config', 'json')}
        return build_run_config(command, cli, args.config)

    # Map command strings to functions for clean dispatching
    commands: Dict[str, Callable] = {
        'catalog': lambda: list_catalog(args.json),
        'protocol': lambda: _execute_with_header('Protocol campaign', run_protocol, configured('protocol')),
        'audit': lambda: _execute_with_header('Causality audit', run_audit, configured('audit')),
    }

    try:
        commands[args.command]()
    except NonlocalLabError as e:
        return _fail(e)
    except OSError as e:
        return _fail(OutputError(f"I/O failure: {e}"))
    return 0


if __name__ == '__main__':
    sys.exit(main())
