import numpy as np
import pytest

from nonlocal_lab import catalog, statevec, stator, transcript as tr, vaidman
from nonlocal_lab.bell import BellKind, EbitPool
from nonlocal_lab.branching import ScriptedChooser, enumerate_branches, outcome_distribution
from nonlocal_lab.catalog import RunOptions
from nonlocal_lab.engine import erasure_distance, local_views
from nonlocal_lab.errors import PreconditionError, ResourceExhausted
from nonlocal_lab.statevec import Operator
from tests.conftest import three_sigma

TWISTED, _ = catalog.vaidman_observable('twisted', 2)
PRODUCT3, _ = catalog.vaidman_observable('product', 3)
TRIALS = 10_000


def _bipartite_branches(psi, O=TWISTED, rounds=1, basis=None):
    def run(chooser):
        return vaidman.vaidman_bipartite_measure(psi, O, 1, EbitPool(3 + 4 * (rounds - 1)), rounds, chooser, basis)

    return enumerate_branches(run)


def _total_variation(a, b):
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


class TestEigensystem:

    def test_degenerate_observable_needs_a_basis(self):
        O = Operator((2, 2), np.diag([1.0, 1.0, 2.0, 3.0]), statevec.HERMITIAN)
        with pytest.raises(PreconditionError):
            vaidman.eigensystem(O)
        values, _, constant = vaidman.eigensystem(O, np.eye(4))
        assert constant is None
        assert values.tolist() == pytest.approx([1.0, 1.0, 2.0, 3.0])

    def test_multiple_of_identity_is_a_constant(self):
        O = Operator((2, 2), 2.5 * np.eye(4), statevec.HERMITIAN)
        assert vaidman.eigensystem(O)[2] == pytest.approx(2.5)

    def test_basis_must_diagonalise(self):
        O = Operator((2,), statevec.pauli('x').mat, statevec.HERMITIAN)
        with pytest.raises(PreconditionError):
            vaidman.eigensystem(O, np.eye(2))


class TestPartialTeleport:

    @pytest.mark.parametrize('script, expected', [([0], (0,)), ([2], (1,))])
    def test_distortion_follows_the_outcome(self, script, expected):
        psi = catalog.parse_state('product(u)').ket
        kinds, post = vaidman.partial_teleport(psi, [0], EbitPool(1), ScriptedChooser(script))
        assert statevec.fidelity(post, statevec.basis_ket((2,), expected)) == pytest.approx(1.0)
        assert kinds == [[BellKind.PSI_MINUS, BellKind.PSI_PLUS, BellKind.PHI_MINUS, BellKind.PHI_PLUS][script[0]]]

    def test_two_qubit_outcomes_are_uniform(self):
        psi = catalog.parse_state('product(u+)').ket
        branches = enumerate_branches(lambda c: vaidman.partial_teleport_protocol(psi, EbitPool(2), c))
        assert len(branches) == 16
        assert all(b.probability == pytest.approx(1 / 16) for b in branches)

    def test_every_qubit_needs_an_ebit(self):
        with pytest.raises(ResourceExhausted):
            vaidman.partial_teleport(catalog.parse_state('product(ud)').ket, [0, 1], EbitPool(1), 0)


class TestBipartite:

    def test_round_one_succeeds_a_quarter_of_the_time(self):
        psi = stator.twisted_basis()[1]
        branches = _bipartite_branches(psi)
        assert sum(b.probability for b in branches if b.result.success) == pytest.approx(0.25, abs=1e-12)
        assert all(b.result.inferred_value == 2.0 for b in branches if b.result.success)

    def test_closed_form_matches_enumeration(self):
        twisted = stator.twisted_basis()
        amps = 0.6 * twisted[0].amps + 0.8j * twisted[3].amps
        psi = statevec.Ket((2, 2), amps)
        enumerated = outcome_distribution(_bipartite_branches(psi), catalog.outcome_key)
        exact = catalog.get_protocol('vaidman_bipartite').exact_distribution(psi, RunOptions(max_rounds=1))
        assert exact == {'1': pytest.approx(0.09), '4': pytest.approx(0.16), 'failure': pytest.approx(0.75)}
        assert _total_variation(enumerated, exact) < 1e-10

    def test_degenerate_observable_with_basis_agrees_with_born(self):
        entry = catalog.get_protocol('vaidman_bipartite')
        options = RunOptions(max_rounds=1, observable='sigma_z_a')
        psi = catalog.parse_state('product(+u)').ket
        enumerated = outcome_distribution(
            enumerate_branches(lambda c: entry.run(psi, c, options), entry.marginalize), catalog.outcome_key)
        assert enumerated == {'1': pytest.approx(0.125), '-1': pytest.approx(0.125), 'failure': pytest.approx(0.75)}

    def test_ebit_ledger_matches_bell_measurements(self):
        psi = stator.twisted_basis()[2]
        rng = np.random.default_rng(5)
        for _ in range(20):
            result = vaidman.vaidman_bipartite_measure(psi, TWISTED, 1, EbitPool(3 + 4 * 3), 4, rng)
            assert result.resources['ebits_consumed'] == result.transcript.count(tr.LOCAL_MEASURE, 'bell_measure')
            tr.check_causality(result.transcript)
            if result.success:
                assert result.inferred_value == 3.0

    def test_identity_is_read_without_ebits(self, singlet):
        result = vaidman.vaidman_bipartite_measure(singlet, Operator.identity((2, 2)), 1, EbitPool(3), 1, 0)
        assert result.inferred_value == pytest.approx(1.0)
        assert result.resources['ebits_consumed'] == 0

    @pytest.mark.slow
    def test_round_one_sampled(self):
        psi = stator.twisted_basis()[1]
        rng = np.random.default_rng(13)
        successes = 0
        for _ in range(TRIALS):
            result = vaidman.vaidman_bipartite_measure(psi, TWISTED, 1, EbitPool(3), 1, rng)
            assert result.resources['ebits_consumed'] == result.transcript.count(tr.LOCAL_MEASURE, 'bell_measure')
            if result.success:
                successes += 1
                assert result.inferred_value == 2.0
        assert abs(successes - TRIALS / 4) <= three_sigma(TRIALS, 0.25)

    @pytest.mark.slow
    def test_two_rounds_sampled(self):
        psi = stator.twisted_basis()[0]
        rng = np.random.default_rng(17)
        p = vaidman.bipartite_success_probability(1, 2)
        successes = 0
        for _ in range(TRIALS):
            result = vaidman.vaidman_bipartite_measure(psi, TWISTED, 1, EbitPool(7), 2, rng)
            if result.success:
                successes += 1
                assert result.inferred_value == 1.0
        assert p == pytest.approx(0.25 + 0.75 / 16)
        assert abs(successes - TRIALS * p) <= three_sigma(TRIALS, p)

    def test_wrong_qubit_count(self, singlet):
        with pytest.raises(PreconditionError):
            vaidman.vaidman_bipartite_measure(singlet, TWISTED, 2, EbitPool(6), 1, 0)

    @pytest.mark.parametrize('site', ['A', 'B'])
    def test_erasure(self, site):
        views = [local_views(_bipartite_branches(psi), site) for psi in stator.twisted_basis()]
        for other in views[1:]:
            assert erasure_distance(views[0], other) < 1e-10


class TestThreeParty:

    @pytest.mark.slow
    def test_round_one_success_rate(self):
        psi = catalog.parse_state('product(udu)').ket
        rng = np.random.default_rng(23)
        successes = 0
        for _ in range(TRIALS):
            result = vaidman.vaidman_three_party_measure(psi, PRODUCT3, EbitPool(8), 1, rng)
            assert result.resources['ebits_consumed'] == result.transcript.count(tr.LOCAL_MEASURE, 'bell_measure')
            if result.success:
                successes += 1
                assert result.inferred_value == 3.0
        assert abs(successes - TRIALS / 16) <= three_sigma(TRIALS, 1 / 16)

    def test_later_rounds_identify_correctly(self):
        psi = catalog.parse_state('product(ddu)').ket
        rng = np.random.default_rng(29)
        for _ in range(40):
            result = vaidman.vaidman_three_party_measure(psi, PRODUCT3, EbitPool(8 + 9 * 5), 6, rng)
            tr.check_causality(result.transcript)
            if result.success:
                assert result.inferred_value == 7.0

    def test_success_probability(self):
        assert vaidman.three_party_success_probability(1) == pytest.approx(1 / 16)
        assert vaidman.three_party_success_probability(2) == pytest.approx(1 / 16 + 15 / 16 / 64)

    def test_needs_one_qubit_per_party(self, singlet):
        with pytest.raises(PreconditionError):
            vaidman.vaidman_three_party_measure(singlet, PRODUCT3, EbitPool(8), 1, 0)
