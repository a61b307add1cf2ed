import numpy as np
import pytest
from hypothesis import assume, given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nonlocal_lab import statevec
from nonlocal_lab.branching import ScriptedChooser
from nonlocal_lab.errors import InvariantBreach, PreconditionError
from nonlocal_lab.statevec import DensityMatrix, Ket, Operator

TOL = 1e-10
MIN_NORM = 1e-3

components = arrays(np.float64, (8,), elements=st.floats(min_value=-1.0, max_value=1.0))


def _ket(parts: np.ndarray) -> Ket:
    amps = parts[:4] + 1j * parts[4:]
    assume(np.linalg.norm(amps) > MIN_NORM)
    return Ket.from_amplitudes(amps, (2, 2))


class TestKet:

    def test_rejects_unnormalised_amplitudes(self):
        with pytest.raises(PreconditionError):
            Ket((2,), np.array([1.0, 1.0]))

    def test_rejects_wrong_size(self):
        with pytest.raises(PreconditionError):
            Ket((2, 2), np.array([1.0, 0.0]))

    def test_from_amplitudes_infers_qubits(self):
        psi = Ket.from_amplitudes([1, 0, 0, 1])
        assert psi.dims == (2, 2)
        assert np.isclose(np.linalg.norm(psi.amps), 1.0)

    def test_amplitudes_are_read_only(self):
        psi = statevec.basis_ket((2,), (0,))
        with pytest.raises(ValueError):
            psi.amps[0] = 0

    def test_json_codec(self):
        psi = Ket.from_amplitudes([1, 1j, -1, 0.5])
        assert statevec.fidelity(Ket.from_json(psi.to_json()), psi) == pytest.approx(1.0, abs=TOL)

    def test_unit_is_tensor_identity(self):
        psi = statevec.basis_ket((3,), (2,))
        assert np.allclose(statevec.tensor(psi, Ket.unit()).amps, psi.amps)
        assert statevec.tensor_all([]).dims == ()


class TestOperators:

    def test_half_turn_is_minus_i_sigma(self):
        for axis in ('x', 'y', 'z'):
            assert np.allclose(statevec.rotation(axis, np.pi).mat, -1j * statevec.SIGMA[axis], atol=TOL)

    def test_spin_eigenvalues(self):
        values = [v for v, _ in statevec.eigenprojectors(statevec.spin('z'))]
        assert values == pytest.approx([-0.5, 0.5])

    def test_hermitian_tag_is_checked(self):
        with pytest.raises(PreconditionError):
            Operator((2,), np.array([[0, 1], [0, 0]]), statevec.HERMITIAN)

    def test_embed_matches_kron(self):
        op = statevec.pauli('x')
        assert np.allclose(statevec.embed(op, [1], (2, 2)).mat, np.kron(np.eye(2), op.mat))
        assert np.allclose(statevec.embed(op, [0], (2, 3)).mat, np.kron(op.mat, np.eye(3)))

    def test_controlled_flips_only_on_control(self):
        cx = statevec.controlled(2, 1, statevec.pauli('x'))
        out = statevec.apply(cx, statevec.basis_ket((2, 2), (1, 0)))
        assert statevec.fidelity(out, statevec.basis_ket((2, 2), (1, 1))) == pytest.approx(1.0)
        out = statevec.apply(cx, statevec.basis_ket((2, 2), (0, 0)))
        assert statevec.fidelity(out, statevec.basis_ket((2, 2), (0, 0))) == pytest.approx(1.0)

    def test_non_unitary_needs_renormalize(self):
        proj = statevec.projector(statevec.basis_ket((2,), (0,)))
        plus = Ket((2,), np.array([1, 1]) / np.sqrt(2))
        with pytest.raises(PreconditionError):
            statevec.apply(proj, plus)
        out = statevec.apply(proj, plus, renormalize=True)
        assert statevec.fidelity(out, statevec.basis_ket((2,), (0,))) == pytest.approx(1.0)

    def test_repeated_target_rejected(self):
        with pytest.raises(PreconditionError):
            statevec.apply(statevec.embed(statevec.pauli('x'), [0], (2, 2)), statevec.basis_ket((2, 2), (0, 0)), [0, 0])

    def test_operator_json_codec(self):
        op = statevec.rotation('y', 0.3)
        back = Operator.from_json(op.to_json())
        assert np.allclose(back.mat, op.mat) and back.kind == op.kind


class TestMeasurement:

    def test_projectors_must_be_complete(self):
        with pytest.raises(PreconditionError):
            statevec.measure_projective(statevec.basis_ket((2,), (0,)),
                                        [statevec.projector(statevec.basis_ket((2,), (0,)))], 0)

    def test_scripted_branch_collapses(self, singlet):
        k, p, post = statevec.measure_projective(singlet, statevec.computational_projectors(2),
                                                 ScriptedChooser([1]), targets=[0])
        assert k == 1 and p == pytest.approx(0.5)
        assert statevec.fidelity(post, statevec.basis_ket((2, 2), (1, 0))) == pytest.approx(1.0)

    def test_impossible_branch_is_an_invariant_breach(self, up_up):
        with pytest.raises(InvariantBreach):
            statevec.measure_projective(up_up, statevec.computational_projectors(2), ScriptedChooser([1]), targets=[0])


class TestStateAnalysis:

    def test_singlet_schmidt_form(self, singlet):
        form = statevec.schmidt_canonical(singlet, [0])
        assert form.rank == 2
        assert np.allclose(form.coeffs, [2 ** -0.5, 2 ** -0.5])
        assert statevec.fidelity(form.reconstruct(), singlet) == pytest.approx(1.0, abs=TOL)

    def test_product_state_has_rank_one(self, up_up):
        assert statevec.schmidt_canonical(up_up, [0]).rank == 1

    def test_reduced_singlet_is_maximally_mixed(self, singlet):
        rho = statevec.reduced_density(singlet, [1])
        assert np.allclose(rho.mat, np.eye(2) / 2)
        assert rho.purity() == pytest.approx(0.5)

    def test_density_matrix_rejects_non_psd(self):
        with pytest.raises(InvariantBreach):
            DensityMatrix((2,), np.diag([1.5, -0.5]))

    def test_trace_distance_of_orthogonal_states(self, up_up, down_down):
        a = statevec.reduced_density(up_up, [0, 1])
        b = statevec.reduced_density(down_down, [0, 1])
        assert statevec.trace_distance(a, b) == pytest.approx(1.0)

    def test_factor_out_removes_known_register(self):
        chi = Ket((2,), np.array([0.6, 0.8]))
        psi = statevec.tensor(statevec.basis_ket((2,), (1,)), chi)
        rest = statevec.factor_out(psi, [0], statevec.basis_ket((2,), (1,)))
        assert statevec.fidelity(rest, chi) == pytest.approx(1.0)

    def test_equal_up_to_phase(self, singlet):
        assert statevec.equal_up_to_phase(singlet, Ket(singlet.dims, 1j * singlet.amps))


@seed(7)
@settings(max_examples=60, deadline=None)
@given(parts=components)
def test_unitaries_preserve_norm(parts):
    psi = _ket(parts)
    for u in (statevec.rotation('x', 0.7), statevec.rotation('y', 2.1)):
        out = statevec.apply(u, psi, [1])
        assert np.linalg.norm(out.amps) == pytest.approx(1.0, abs=1e-12)


@seed(11)
@settings(max_examples=60, deadline=None)
@given(parts=components)
def test_schmidt_reconstructs_state(parts):
    psi = _ket(parts)
    form = statevec.schmidt_canonical(psi, [0])
    assert np.allclose(form.reconstruct().amps, psi.amps, atol=1e-9)
    assert np.sum(form.coeffs ** 2) == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(form.coeffs) <= 1e-12)


@seed(13)
@settings(max_examples=60, deadline=None)
@given(parts=components)
def test_purity_bounds(parts):
    purity = statevec.reduced_density(_ket(parts), [0]).purity()
    assert 0.5 - 1e-9 <= purity <= 1.0 + 1e-9


@seed(17)
@settings(max_examples=60, deadline=None)
@given(parts=components)
def test_born_completeness(parts):
    psi = _ket(parts)
    projectors = [p for _, p in statevec.eigenprojectors(statevec.embed(statevec.spin('x'), [0], (2, 2)))]
    total = sum(p for p, _ in statevec.born_branches(psi, projectors))
    assert total == pytest.approx(1.0, abs=1e-9)
