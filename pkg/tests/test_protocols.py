import numpy as np
import pytest
from scipy.stats import unitary_group

from nonlocal_lab import catalog, config, meters, protocols, statevec, transcript as tr
from nonlocal_lab.branching import enumerate_branches, outcome_distribution
from nonlocal_lab.catalog import RunOptions
from nonlocal_lab.errors import PreconditionError
from tests.conftest import random_ket, three_sigma

TRIALS = 10_000


def _distribution(name, psi):
    return catalog.get_protocol(name).exact_distribution(psi, RunOptions())


# ═══════════════════════════════════════════════════════════════════════════
# Total spin
# ═══════════════════════════════════════════════════════════════════════════

class TestTotalSpin:

    @pytest.mark.parametrize('spec, expected', [
        ('psi_plus', 0.0),
        ('psi_minus', 0.0),
        ('basis_1', 1.0),
        ('basis_2', -1.0),
    ])
    def test_eigenstates_read_their_eigenvalue(self, spec, expected):
        psi = catalog.parse_state(spec).ket
        result = protocols.aa_total_spin_z(psi, 42)
        assert result.inferred_value == pytest.approx(expected)
        assert statevec.fidelity(result.post_state, psi) >= 1 - 1e-10

    def test_exact_distribution_is_a_point_mass(self, psi_plus):
        assert _distribution('aa_total_spin_z', psi_plus) == {'0': pytest.approx(1.0)}

    def test_superposition_splits_by_born(self):
        psi = statevec.Ket.from_amplitudes([0.6, 0, 0, 0.8])
        distribution = _distribution('aa_total_spin_z', psi)
        assert distribution == {'1': pytest.approx(0.36), '-1': pytest.approx(0.64)}

    def test_measurement_is_instantaneous(self, psi_plus):
        result = protocols.aa_total_spin_z(psi_plus, 7)
        tr.check_instantaneity(result.transcript)
        assert result.resources['ebits_consumed'] == 0
        assert result.transcript.count(tr.LOCAL_OP, 'couple_meter') == 2

    def test_requires_two_qubits(self):
        with pytest.raises(PreconditionError):
            protocols.aa_total_spin_z(statevec.basis_ket((3, 2), (0, 0)), 0)

    @pytest.mark.slow
    def test_single_dials_are_uniform_when_sampled(self, singlet):
        rng = np.random.default_rng(31)
        labels = meters.prepare_bank(2, config.SPIN_SUM_DIAL).register.labels
        counts = {record: dict.fromkeys(labels, 0) for record in ('sigma_z.A', 'sigma_z.B')}
        for _ in range(TRIALS):
            dials = protocols.aa_total_spin_z(singlet, rng).details['dials']
            for record, label in dials.items():
                counts[record][label] += 1
        p = 1 / config.SPIN_SUM_DIAL
        for per_label in counts.values():
            for count in per_label.values():
                assert abs(count - TRIALS * p) <= three_sigma(TRIALS, p)


# ═══════════════════════════════════════════════════════════════════════════
# Singlet verification
# ═══════════════════════════════════════════════════════════════════════════

class TestSingletVerification:

    def test_singlet_passes(self, singlet):
        assert _distribution('aa_verify_singlet', singlet) == {'yes': pytest.approx(1.0)}

    @pytest.mark.parametrize('spec', ['psi_plus', 'basis_1', 'phi_minus'])
    def test_triplets_fail(self, spec):
        psi = catalog.parse_state(spec).ket
        assert _distribution('aa_verify_singlet', psi) == {'no': pytest.approx(1.0)}

    def test_singlet_fraction_is_the_pass_rate(self):
        psi = statevec.Ket.from_amplitudes([0, 0.8, -0.6, 0])
        distribution = _distribution('aa_verify_singlet', psi)
        singlet_weight = abs((0.8 + 0.6) / np.sqrt(2)) ** 2
        assert distribution['yes'] == pytest.approx(singlet_weight, abs=1e-10)

    def test_rejected_triplet_is_left_intact(self, psi_plus):
        for branch in enumerate_branches(lambda c: protocols.aa_verify_singlet(psi_plus, c), ('dial',)):
            assert branch.result.inferred_value == 'no'
            assert statevec.fidelity(branch.result.post_state, psi_plus) >= 1 - 1e-10

    def test_rejection_removes_the_singlet_component(self, singlet, rng):
        psi = random_ket(rng, (2, 2))
        overlap = np.vdot(singlet.amps, psi.amps)
        expected = statevec.Ket.from_amplitudes(psi.amps - overlap * singlet.amps, (2, 2))
        answers = set()
        for branch in enumerate_branches(lambda c: protocols.aa_verify_singlet(psi, c), ('dial',)):
            answers.add(branch.result.inferred_value)
            target = singlet if branch.result.inferred_value == 'yes' else expected
            assert statevec.fidelity(branch.result.post_state, target) >= 1 - 1e-10
        assert answers == {'yes', 'no'}

    def test_total_spin_then_singlet(self, psi_plus):
        result = protocols.aa_total_spin_then_singlet(psi_plus, 3)
        assert result.inferred_value['sigma_z'] == pytest.approx(0.0)
        assert result.inferred_value['singlet'] == 'no'
        assert result.inferred_value['total_spin_squared'] == 2.0
        tr.check_instantaneity(result.transcript)

    def test_verification_stages_are_complete(self):
        stages = protocols.singlet_verification_stages(3)
        assert len(stages) == 4
        for stage in stages:
            statevec._check_projectors(stage)

    def test_qubit_stages(self):
        assert len(protocols.singlet_verification_stages(2)) == 3


# ═══════════════════════════════════════════════════════════════════════════
# Canonical-form verification
# ═══════════════════════════════════════════════════════════════════════════

class TestCanonicalVerification:

    def test_canonical_state_passes(self):
        psi = catalog.parse_state('canonical(3,2)').ket
        assert _distribution('verify_canonical_equal', psi) == {'yes': pytest.approx(1.0)}

    def test_three_parties(self):
        psi = catalog.parse_state('canonical(2,3)').ket
        result = protocols.verify_canonical_equal(psi, 3, 2, 5)
        assert result.inferred_value == 'yes'
        tr.check_instantaneity(result.transcript)

    def test_product_state_passes_one_third_of_the_time(self):
        psi = statevec.basis_ket((3, 3), (0, 0))
        assert _distribution('verify_canonical_equal', psi)['yes'] == pytest.approx(1 / 3, abs=1e-10)

    def test_unequal_coefficients_pass_with_the_equal_state_overlap(self):
        phi = np.pi / 6
        psi = statevec.Ket((2, 2), np.array([np.cos(phi), 0, 0, np.sin(phi)]))
        equal = catalog.parse_state('canonical(2,2)').ket
        p_yes = abs(np.vdot(equal.amps, psi.amps)) ** 2
        distribution = _distribution('verify_canonical_equal', psi)
        assert p_yes == pytest.approx((1 + np.sin(2 * phi)) / 2)
        assert distribution['yes'] == pytest.approx(p_yes, abs=1e-10)
        assert distribution['no'] == pytest.approx(1 - p_yes, abs=1e-10)

    def test_mismatched_levels_always_fail(self):
        psi = statevec.basis_ket((3, 3), (0, 1))
        assert _distribution('verify_canonical_equal', psi) == {'no': pytest.approx(1.0)}

    def test_rotated_local_bases(self):
        u = unitary_group.rvs(3, random_state=1)
        psi = statevec.Ket((3, 3), np.kron(u, u.conj()) @ catalog.parse_state('canonical(3,2)').ket.amps)
        bases = [u, u.conj()]
        branches = enumerate_branches(lambda c: protocols.verify_canonical_equal(psi, 2, 3, c, bases), ('dial',))
        assert outcome_distribution(branches, lambda r: r.inferred_value) == {'yes': pytest.approx(1.0)}

    def test_dims_must_match(self, singlet):
        with pytest.raises(PreconditionError):
            protocols.verify_canonical_equal(singlet, 2, 3, 0)

    def test_stages_are_complete(self):
        for stage in protocols.canonical_verification_stages(2, 3):
            statevec._check_projectors(stage)
