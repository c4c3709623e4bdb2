import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from eprbath.errors import (
    ChannelNotPhysicalError,
    DegenerateMeasurementError,
    InvalidArgumentError,
    InvalidStateError,
)
from eprbath.gaussian import (
    ATOMIC_C, ATOMIC_S, LIGHT_C, LIGHT_S,
    GaussianState, SqueezeParams,
    apply_affine_channel, beam_splitter_loss, condition_on_homodyne,
    epr_xi, new_vacuum, symplectic_form,
)


def random_symplectic(n_modes, rng, scale=0.6):
    """exp(Omega G) with symmetric G is symplectic."""
    G = rng.normal(0, scale, (2 * n_modes, 2 * n_modes))
    G = 0.5 * (G + G.T)
    return expm(symplectic_form(n_modes) @ G)


class TestSqueezeParams:
    def test_from_z(self):
        sq = SqueezeParams.from_Z(2.5)
        assert sq.mu == pytest.approx(np.cosh(sq.r), abs=1e-14)
        assert sq.nu == pytest.approx(np.sinh(sq.r), abs=1e-14)
        assert sq.mu**2 - sq.nu**2 == pytest.approx(1.0, abs=1e-12)
        assert sq.Z * sq.Zinv == pytest.approx(1.0, abs=1e-12)
        assert sq.Z == pytest.approx(2.5, abs=1e-14)

    def test_invalid_z(self):
        with pytest.raises(InvalidArgumentError):
            SqueezeParams.from_Z(-1.0)


class TestNewVacuum:
    def test_single_mode(self):
        st_ = new_vacuum(1)
        assert np.array_equal(st_.cov, 0.5 * np.eye(2))
        assert np.array_equal(st_.disp, np.zeros(2))

    def test_two_modes_css_witness(self):
        st_ = new_vacuum(2, (ATOMIC_C, ATOMIC_S))
        assert np.array_equal(st_.cov, 0.5 * np.eye(4))
        assert epr_xi(st_) == pytest.approx(1.0, abs=1e-15)

    def test_three_modes_symplectic_eigenvalues(self):
        st_ = new_vacuum(3)
        nu = GaussianState.symplectic_eigenvalues(st_.cov)
        assert np.allclose(nu, 0.5, atol=1e-14)

    def test_zero_modes_rejected(self):
        with pytest.raises(InvalidArgumentError):
            new_vacuum(0)


class TestAffineChannel:
    def test_identity(self):
        st_ = new_vacuum(2)
        out = apply_affine_channel(st_, np.eye(4), np.zeros((4, 4)))
        assert np.allclose(out.cov, st_.cov)
        assert np.allclose(out.disp, st_.disp)

    def test_loss_fixed_point_on_vacuum(self):
        eta = 0.6
        st_ = new_vacuum(1)
        S = np.sqrt(eta) * np.eye(2)
        N = (1 - eta) / 2 * np.eye(2)
        out = apply_affine_channel(st_, S, N)
        assert np.allclose(out.cov, st_.cov, atol=1e-15)

    def test_symplectic_preserves_symplectic_eigenvalues(self):
        rng = np.random.default_rng(3)
        st_ = new_vacuum(3)
        for _ in range(5):
            S = random_symplectic(3, rng)
            out = apply_affine_channel(st_, S, np.zeros((6, 6)))
            nu = GaussianState.symplectic_eigenvalues(out.cov)
            assert np.allclose(nu, 0.5, atol=1e-10)

    def test_unphysical_channel_reports_eigenvalue(self):
        st_ = new_vacuum(1)
        # squeezing without noise then "measuring away" variance is fine, but
        # shrinking both quadratures violates uncertainty
        S = 0.5 * np.eye(2)
        with pytest.raises(ChannelNotPhysicalError) as exc:
            apply_affine_channel(st_, S, np.zeros((2, 2)))
        assert exc.value.eigenvalue < 0

    def test_asymmetric_noise_rejected(self):
        st_ = new_vacuum(1)
        N = np.array([[0.0, 0.1], [0.0, 0.0]])
        with pytest.raises(InvalidArgumentError):
            apply_affine_channel(st_, np.eye(2), N)


class TestConditionOnHomodyne:
    def test_uncorrelated_block_unchanged(self):
        st_ = new_vacuum(2, ("atom", "light"))
        cov = np.array(st_.cov)
        cov[0, 0] = cov[1, 1] = 1.0
        st_ = GaussianState(st_.modes, cov, st_.disp)
        out = condition_on_homodyne(st_, "light", "X", outcome=0.7)
        assert out.modes == ("atom",)
        assert np.allclose(out.cov, np.diag([1.0, 1.0]))
        assert np.allclose(out.disp, 0.0)

    def test_schur_complement_value(self):
        # var(P)=1, var(y)=1, cov_sym=0.5 -> var_cond(P)=0.75; oracle: direct
        # 2x2 Schur complement on the quadrature pair
        cov = 0.5 * np.eye(4)
        cov[1, 1] = 1.0   # P of mode 0
        cov[2, 2] = 1.0   # y (X of mode 1)
        cov[1, 2] = cov[2, 1] = 0.5
        cov[3, 3] = 4.0   # keep the light mode physical
        st_ = GaussianState(("atom", "light"), cov, np.zeros(4))
        out = condition_on_homodyne(st_, "light", "X", outcome=0.0)
        brute = cov[1, 1] - cov[1, 2] ** 2 / cov[2, 2]
        assert brute == pytest.approx(0.75, abs=1e-15)
        assert out.variance("atom", "P") == pytest.approx(brute, abs=1e-12)

    def test_conditioning_squeezed_light_reduces_atomic_variance(self):
        # correlated two-mode squeezed pair: conditioning beats marginalizing
        r = 0.8
        c, s = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
        cov = np.array([
            [c, 0, s, 0],
            [0, c, 0, -s],
            [s, 0, c, 0],
            [0, -s, 0, c],
        ])
        st_ = GaussianState(("atom", "light"), cov, np.zeros(4))
        marginal = st_.variance("atom", "P")
        out = condition_on_homodyne(st_, "light", "P", outcome=0.3)
        assert out.variance("atom", "P") < marginal

    def test_outcome_independent_covariance_and_mean_update(self):
        cov = np.array([[1.0, 0.3], [0.3, 0.8]])
        full = 0.5 * np.eye(4)
        full[:2, :2] = cov
        full[2, 2] = full[3, 3] = 2.0
        full[0, 2] = full[2, 0] = 0.4
        st_ = GaussianState(("a", "b"), full, np.zeros(4))
        out1 = condition_on_homodyne(st_, "b", "X", outcome=1.0)
        out2 = condition_on_homodyne(st_, "b", "X", outcome=-2.0)
        assert np.allclose(out1.cov, out2.cov)
        assert not np.allclose(out1.disp, out2.disp)

    def test_degenerate_measurement(self):
        cov = 0.5 * np.eye(4)
        cov[2, 2] = 1e-16
        cov[3, 3] = 1e17  # keep uncertainty product fine
        st_ = GaussianState(("a", "b"), cov, np.zeros(4))
        with pytest.raises(DegenerateMeasurementError):
            condition_on_homodyne(st_, "b", "X", outcome=0.0)


class TestEprXi:
    def test_css(self):
        st_ = new_vacuum(2, (ATOMIC_C, ATOMIC_S))
        assert epr_xi(st_) == pytest.approx(1.0, abs=1e-15)

    def test_ideal_two_mode_squeezed_value(self):
        # per-quadrature variance (mu-nu)^2/2 at Z=2.5 -> xi = (mu-nu)^2 = 0.16
        sq = SqueezeParams.from_Z(2.5)
        v = sq.Zinv**2 / 2
        cov = np.diag([1 / (4 * v), v, 1 / (4 * v), v])
        st_ = GaussianState((ATOMIC_C, ATOMIC_S), cov, np.zeros(4))
        assert epr_xi(st_) == pytest.approx(0.16, abs=1e-12)

    def test_equals_sum_of_marginals(self):
        rng = np.random.default_rng(11)
        S = random_symplectic(2, rng)
        cov = S @ (0.5 * np.eye(4)) @ S.T
        st_ = GaussianState((ATOMIC_C, ATOMIC_S), cov, np.zeros(4))
        # independent marginalization: direct matrix indexing
        assert epr_xi(st_) == pytest.approx(cov[1, 1] + cov[3, 3], abs=1e-12)

    def test_displacement_invariance(self):
        st_ = new_vacuum(2, (ATOMIC_C, ATOMIC_S))
        shifted = GaussianState(st_.modes, st_.cov, np.array([1.0, -2.0, 1.0, -2.0]))
        assert epr_xi(shifted) == epr_xi(st_)

    def test_missing_modes(self):
        with pytest.raises(InvalidStateError):
            epr_xi(new_vacuum(2))


class TestBeamSplitterLoss:
    def test_eta_one_identity(self):
        st_ = new_vacuum(2)
        out = beam_splitter_loss(st_, "mode_0", 1.0)
        assert np.allclose(out.cov, st_.cov)

    def test_eta_zero_resets_to_vacuum(self):
        cov = np.diag([3.0, 3.0, 0.5, 0.5])
        st_ = GaussianState(("a", "b"), cov, np.array([2.0, 0, 0, 0]))
        out = beam_splitter_loss(st_, "a", 0.0)
        assert np.allclose(out.cov[:2, :2], 0.5 * np.eye(2))
        assert out.disp[0] == pytest.approx(0.0)

    def test_detection_efficiency_value(self):
        cov = np.diag([1.0, 1.0])
        st_ = GaussianState(("a",), cov, np.zeros(2))
        out = beam_splitter_loss(st_, "a", 0.84)
        assert out.variance("a", "X") == pytest.approx(0.84 * 1.0 + 0.08, abs=1e-12)

    def test_composition(self):
        cov = np.diag([2.0, 1.0])
        st_ = GaussianState(("a",), cov, np.zeros(2))
        twice = beam_splitter_loss(beam_splitter_loss(st_, "a", 0.9), "a", 0.7)
        once = beam_splitter_loss(st_, "a", 0.63)
        assert np.allclose(twice.cov, once.cov, atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            beam_splitter_loss(new_vacuum(1), "mode_0", 1.2)


class TestStateValidation:
    def test_asymmetric_cov_rejected(self):
        cov = 0.5 * np.eye(2)
        cov[0, 1] = 1e-6
        with pytest.raises(InvalidStateError):
            GaussianState(("a",), cov, np.zeros(2))

    def test_uncertainty_violation_rejected(self):
        with pytest.raises(InvalidStateError):
            GaussianState(("a",), 0.1 * np.eye(2), np.zeros(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_uncertainty_preserved_by_random_channel_chains(seed):
    """Every reachable state satisfies the uncertainty relation."""
    rng = np.random.default_rng(seed)
    state = new_vacuum(2, ("a", "b"))
    for _ in range(4):
        kind = rng.integers(0, 3)
        if kind == 0:
            S = random_symplectic(2, rng, scale=0.4)
            state = apply_affine_channel(state, S, np.zeros((4, 4)))
        elif kind == 1:
            state = beam_splitter_loss(state, ("a", "b")[rng.integers(2)],
                                       float(rng.uniform(0.2, 1.0)))
        else:
            squeezed = apply_affine_channel(
                state, random_symplectic(2, rng, scale=0.3), np.zeros((4, 4)))
            reduced = condition_on_homodyne(
                squeezed, "b", "X", float(rng.normal()))
            # re-attach a fresh mode to keep the chain going
            cov = 0.5 * np.eye(4)
            cov[:2, :2] = reduced.cov
            disp = np.zeros(4)
            disp[:2] = reduced.disp
            state = GaussianState(("a", "b"), cov, disp)
    nu_min = GaussianState.symplectic_eigenvalues(state.cov).min()
    assert nu_min >= 0.5 - 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_conditioning_never_increases_correlated_variances(seed):
    rng = np.random.default_rng(seed)
    S = random_symplectic(3, rng, scale=0.5)
    cov = S @ (0.5 * np.eye(6)) @ S.T + 0.1 * np.eye(6)
    state = GaussianState(("a", "b", "m"), cov, np.zeros(6))
    out = condition_on_homodyne(state, "m", "X", 0.0)
    k = 4  # index of measured quadrature (X of mode m)
    for label in ("a", "b"):
        for quad in ("X", "P"):
            i = state.quad_index(label, quad)
            before = cov[i, i]
            after = out.variance(label, quad)
            if abs(cov[i, k]) < 1e-14:
                assert after == pytest.approx(before, abs=1e-12)
            else:
                assert after <= before + 1e-12
