import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from nonlocal_lab import artifacts, campaign, catalog
from nonlocal_lab.catalog import RunOptions
from nonlocal_lab.errors import InvariantBreach, UsageError
from nonlocal_lab.run_config import build_run_config, load_config_file


class TestSeeding:

    def test_trial_seeds_are_reproducible(self):
        first = [s.generate_state(1)[0] for s in campaign.trial_seeds(9, 4)]
        again = [s.generate_state(1)[0] for s in campaign.trial_seeds(9, 4)]
        assert first == again
        assert len(set(first)) == 4

    def test_same_seed_same_campaign(self):
        a = campaign.run_campaign('aa_verify_singlet', 'psi_plus', 5, 10)
        b = campaign.run_campaign('aa_verify_singlet', 'psi_plus', 5, 10)
        assert a.summary() == b.summary()


class TestCampaign:

    def test_twisted_basis_is_always_identified(self):
        result = campaign.run_campaign('gr_twisted', 'twisted_1', 1, 50)
        summary = result.summary()
        assert result.accuracy == 1.0
        assert summary['success_rate'] == 1.0
        assert summary['all_within_3sigma']
        assert summary['mean_ebits'] == 1.0

    def test_total_spin_exact_distribution(self):
        result = campaign.run_campaign('aa_total_spin_z', 'psi_plus', 3, 10)
        assert result.exact == {'0': pytest.approx(1.0)}
        assert result.frequencies['outcome'].tolist() == ['0']

    def test_state_alpha_reaches_the_protocol(self):
        result = campaign.run_campaign('gr_general_angle', 'twisted_3@pi/4', 2, 20, RunOptions(max_rounds=2))
        assert result.first.details['alpha'] == pytest.approx(np.pi / 4)
        assert result.accuracy == 1.0

    def test_failures_are_tabulated(self):
        result = campaign.run_campaign('vaidman_bipartite', 'twisted_2', 8, 200, RunOptions(max_rounds=1))
        table = result.frequencies.set_index('outcome')
        assert table.loc['failure', 'exact'] == pytest.approx(0.75)
        assert result.summary()['all_within_3sigma']
        assert result.accuracy == 1.0

    def test_superposition_has_no_single_answer(self):
        result = campaign.run_campaign('aa_total_spin_z', 'amps:0.6;0;0;0.8', 4, 30)
        assert result.accuracy is None
        assert result.summary()['accuracy'] is None

    def test_within_bound(self):
        assert campaign.within_bound(50, 100, 0.5)
        assert campaign.within_bound(65, 100, 0.5)
        assert not campaign.within_bound(66, 100, 0.5)
        assert campaign.within_bound(10, 10, 1.0)
        assert not campaign.within_bound(9, 10, 1.0)

    def test_expected_outcome(self):
        assert campaign.expected_outcome({'3': 0.25, 'failure': 0.75}) == '3'
        assert campaign.expected_outcome({'1': 0.5, '-1': 0.5}) is None


class TestRunConfig:

    def test_protocol_needs_a_seed(self):
        with pytest.raises(UsageError):
            build_run_config('protocol', {'protocol': 'gr_twisted'}, environ={})

    def test_audit_does_not(self):
        cfg = build_run_config('audit', {'audit': 'degenerate_demo'}, environ={})
        assert cfg.seed is None

    def test_precedence(self, tmp_path):
        path = tmp_path / 'run.conf'
        path.write_text("# defaults\nseed = 3\ntrials=5\nout=/from/file\nalpha = pi/4  # twist\n")
        cfg = build_run_config('protocol', {'trials': 7, 'seed': None}, path,
                               environ={'NONLOCAL_LAB_OUTPUT_DIR': '/from/env'})
        assert (cfg.seed, cfg.trials) == (3, 7)
        assert cfg.out == Path('/from/env')
        assert cfg.alpha == pytest.approx(np.pi / 4)

    def test_cli_out_wins(self, tmp_path):
        cfg = build_run_config('audit', {'out': tmp_path}, environ={'NONLOCAL_LAB_OUTPUT_DIR': '/from/env'})
        assert cfg.out == tmp_path

    @pytest.mark.parametrize('text', ['seed 3\n', 'colour = blue\n', 'trials = many\n'])
    def test_bad_config_lines(self, tmp_path, text):
        path = tmp_path / 'bad.conf'
        path.write_text(text)
        with pytest.raises(UsageError):
            load_config_file(path)

    @pytest.mark.parametrize('cli', [{'trials': 0}, {'workers': 0}, {'format': 'xml'}])
    def test_invalid_values(self, cli):
        with pytest.raises(UsageError):
            build_run_config('protocol', {'seed': 1, **cli}, environ={})


class TestArtifacts:

    def _write(self, out: Path):
        result = campaign.run_campaign('gr_twisted', 'twisted_4', 12, 25)
        return artifacts.write_protocol_artifacts(out, result.summary(), result.first.transcript, result.frequencies)

    def test_artifacts_are_byte_identical(self, tmp_path):
        first = self._write(tmp_path / 'a')
        second = self._write(tmp_path / 'b')
        assert [p.name for p in first] == ['transcript.jsonl', 'summary.json', 'frequencies.csv']
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()

    def test_transcript_lines_are_events(self, tmp_path):
        transcript_path = self._write(tmp_path)[0]
        events = [json.loads(line) for line in transcript_path.read_text().splitlines()]
        assert events and all(set(e) == {'tick', 'site', 'kind', 'payload'} for e in events)

    def test_float_columns_are_formatted(self):
        df = pd.DataFrame({'outcome': ['1'], 'exact': [0.25], 'empirical': [0.0]})
        text = artifacts.table_csv(df, artifacts.FREQUENCY_FORMATS)
        assert text == 'outcome,exact,empirical\n1,0.2500000000,0.0\n'

    def test_schema_violation_is_an_invariant_breach(self, tmp_path):
        with pytest.raises(InvariantBreach):
            artifacts.write_json(tmp_path / 'report.json', {'audit': 'made_up', 'passed': True}, 'report')
        assert not (tmp_path / 'report.json').exists()

    def test_invalid_summary_leaves_no_partial_set(self, tmp_path):
        result = campaign.run_campaign('gr_twisted', 'twisted_4', 12, 5)
        out = tmp_path / 'out'
        with pytest.raises(InvariantBreach):
            artifacts.write_protocol_artifacts(out, {'protocol': 'gr_twisted'}, result.first.transcript,
                                               result.frequencies)
        assert not out.exists()

    def test_numpy_values_are_plain(self):
        assert artifacts.to_plain({'p': np.float64(0.5), 'k': np.int64(3)}) == {'p': 0.5, 'k': 3}

    def test_catalog_entries_have_runners(self):
        assert all(callable(e.run) for e in catalog.PROTOCOLS.values())
