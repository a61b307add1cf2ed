import json

import pytest

import run
from nonlocal_lab import config
from nonlocal_lab.errors import OutputError


@pytest.fixture(autouse=True)
def _no_env_output_dir(monkeypatch):
    monkeypatch.delenv('NONLOCAL_LAB_OUTPUT_DIR', raising=False)


def test_catalog_json(capsys):
    assert run.main(['catalog', '--json']) == 0
    listing = json.loads(capsys.readouterr().out)
    assert len(listing['protocols']) >= 7
    assert [a['name'] for a in listing['audits']] == [
        'phi_scan', 'pv_theorems', 'entangled_projector', 'degenerate_demo', 'protocol_nosignal']


def test_catalog_text(capsys):
    assert run.main(['catalog']) == 0
    out = capsys.readouterr().out
    assert 'canonical(K,M)' in out
    assert 'aa_total_spin_z (correlated meters)' in out
    assert 'gr_twisted (stator)' in out
    assert 'phi_scan (causality audit)' in out


@pytest.mark.parametrize('argv', [
    ['protocol', '--protocol', 'no_such_protocol', '--seed', '1'],
    ['protocol', '--protocol', 'gr_twisted', '--state', 'not_a_state', '--seed', '1'],
    ['protocol', '--protocol', 'gr_twisted'],
    ['audit', '--audit', 'no_such_audit'],
])
def test_usage_errors_exit_2(argv, tmp_path):
    assert run.main(argv + ['--out', str(tmp_path)]) == config.EXIT_CODES['usage']


def test_precondition_exit_3(tmp_path):
    argv = ['protocol', '--protocol', 'aa_total_spin_z', '--state', 'canonical(3,2)', '--seed', '1',
            '--out', str(tmp_path)]
    assert run.main(argv) == config.EXIT_CODES['precondition']


def test_protocol_run_writes_artifacts(tmp_path, capsys):
    argv = ['protocol', '--protocol', 'gr_twisted', '--state', 'twisted_3', '--seed', '4', '--trials', '20',
            '--out', str(tmp_path)]
    assert run.main(argv) == 0
    for name in (config.TRANSCRIPT_FILENAME, config.SUMMARY_FILENAME, config.FREQUENCY_FILENAME):
        assert (tmp_path / name).exists()
    summary = json.loads((tmp_path / config.SUMMARY_FILENAME).read_text())
    assert summary['accuracy'] == 1.0
    assert summary['first_trial']['inferred_value'] == 3
    assert '✅' in capsys.readouterr().out


def test_csv_echo(tmp_path, capsys):
    argv = ['protocol', '--protocol', 'aa_verify_singlet', '--seed', '2', '--trials', '5', '--format', 'csv',
            '--out', str(tmp_path)]
    assert run.main(argv) == 0
    assert 'outcome,count,empirical,exact,within_3sigma,accuracy' in capsys.readouterr().out


def test_single_trial_skips_the_table(tmp_path):
    assert run.main(['protocol', '--protocol', 'aa_total_spin_z', '--seed', '1', '--out', str(tmp_path)]) == 0
    assert not (tmp_path / config.FREQUENCY_FILENAME).exists()


def test_audit_writes_report(tmp_path):
    assert run.main(['audit', '--audit', 'degenerate_demo', '--out', str(tmp_path)]) == 0
    report = json.loads((tmp_path / config.REPORT_FILENAME).read_text())
    assert report['passed'] and report['audit'] == 'degenerate_demo'


def test_config_file_supplies_defaults(tmp_path):
    conf = tmp_path / 'run.conf'
    conf.write_text(f"seed = 6\ntrials = 3\nout = {tmp_path / 'from_file'}\n")
    assert run.main(['protocol', '--protocol', 'aa_total_spin_z', '--config', str(conf)]) == 0
    summary = json.loads((tmp_path / 'from_file' / config.SUMMARY_FILENAME).read_text())
    assert (summary['seed'], summary['trials']) == (6, 3)


def test_unwritable_output_exit_6(tmp_path):
    blocker = tmp_path / 'not_a_directory'
    blocker.write_text('')
    argv = ['protocol', '--protocol', 'aa_total_spin_z', '--seed', '1', '--out', str(blocker)]
    assert run.main(argv) == config.EXIT_CODES['io'] == OutputError.exit_code
