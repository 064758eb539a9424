import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeraser.elements import (
    QWP_ANGLE,
    AnalyzerSpec,
    QPlateSpec,
    WaveplateKind,
    WaveplateSpec,
    apply_qplate,
    apply_waveplate,
    polarization_projector,
    predict_delta,
    project_polarization,
    qplate_operator,
    waveplate_matrix,
    waveplate_operator,
)
from qeraser.measurement import analytic_probability, detection_probability, prepare_hybrid_state
from qeraser.spinorbit import (
    CIRC_TO_LIN,
    PolBasis,
    SpinOrbitState,
    TruncationError,
    inner_product,
    make_linear_mode,
    make_scalar_mode,
)

S = 1 / np.sqrt(2)
QWP45 = WaveplateSpec(WaveplateKind.QUARTER, QWP_ANGLE)


def random_state(rng, lmax=3, max_ell=None):
    amps = rng.normal(size=(2, 2 * lmax + 1)) + 1j * rng.normal(size=(2, 2 * lmax + 1))
    if max_ell is not None:
        ells = np.arange(-lmax, lmax + 1)
        amps[:, np.abs(ells) > max_ell] = 0
    return SpinOrbitState(amps, lmax).normalized()


def is_linear(pol2):
    """Linear polarization has equal circular magnitudes."""
    return abs(abs(pol2[0]) - abs(pol2[1])) < 1e-12


class TestQPlate:
    def test_r0_goes_to_l_minus1(self):
        out = apply_qplate(make_scalar_mode(PolBasis.R, 0), QPlateSpec(0.5))
        assert out.amplitude(PolBasis.L, -1) == pytest.approx(1.0, abs=1e-12)
        assert out.norm() == pytest.approx(1.0, abs=1e-12)

    def test_l0_goes_to_r_plus1(self):
        out = apply_qplate(make_scalar_mode(PolBasis.L, 0), QPlateSpec(0.5))
        assert out.amplitude(PolBasis.R, 1) == pytest.approx(1.0, abs=1e-12)

    def test_horizontal_gives_hybrid_state(self):
        out = apply_qplate(make_linear_mode(1, 0), QPlateSpec(0.5))
        assert out.amplitude(PolBasis.L, -1) == pytest.approx(S)
        assert out.amplitude(PolBasis.R, 1) == pytest.approx(S)
        assert np.sum(np.abs(out.amplitudes) ** 2) == pytest.approx(1.0)

    def test_q_one(self):
        out = apply_qplate(make_scalar_mode(PolBasis.R, 1), QPlateSpec(1.0))
        assert out.amplitude(PolBasis.L, -1) == pytest.approx(1.0)

    def test_self_inverse(self):
        # the same plate twice restores both spin and OAM
        rng = np.random.default_rng(3)
        for q in (0.5, 1.0, -1.5):
            k = int(abs(2 * q))
            psi = random_state(rng, max_ell=3 - k)
            plate = QPlateSpec(q)
            back = apply_qplate(apply_qplate(psi, plate), plate)
            np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-12)

    def test_opposite_charge_shifts_oam(self):
        # a q plate followed by a -q plate adds -4q to an R input
        out = apply_qplate(apply_qplate(make_scalar_mode(PolBasis.R, 0), QPlateSpec(0.5)), QPlateSpec(-0.5))
        assert out.amplitude(PolBasis.R, -2) == pytest.approx(1.0)

    def test_truncation_error_names_ell(self):
        with pytest.raises(TruncationError, match="ell=-4"):
            apply_qplate(make_scalar_mode(PolBasis.R, -3), QPlateSpec(0.5))

    def test_rejects_non_half_integer(self):
        with pytest.raises(ValueError, match="half-integer"):
            QPlateSpec(0.3)

    def test_unitary_where_untruncated(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b = random_state(rng, max_ell=2), random_state(rng, max_ell=2)
            p = QPlateSpec(0.5)
            lhs = inner_product(apply_qplate(a, p), apply_qplate(b, p))
            assert abs(lhs - inner_product(a, b)) < 1e-10

    def test_operator_is_partial_isometry(self):
        u = qplate_operator(QPlateSpec(0.5))
        np.testing.assert_allclose(u @ u.conj().T @ u, u, atol=1e-15)


class TestWaveplates:
    @pytest.mark.parametrize("kind,retardance", [(WaveplateKind.QUARTER, np.pi / 2), (WaveplateKind.HALF, np.pi)])
    @pytest.mark.parametrize("angle", np.linspace(0, np.pi, 7))
    def test_unitary_with_retardance(self, kind, retardance, angle):
        m = waveplate_matrix(WaveplateSpec(kind, angle))
        np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-12)
        phases = np.angle(np.linalg.eigvals(m))
        diff = abs(np.angle(np.exp(1j * (phases[0] - phases[1]))))
        assert diff == pytest.approx(retardance, abs=1e-12)

    def test_half_wave_squared(self):
        m = waveplate_matrix(WaveplateSpec(WaveplateKind.HALF, 0.0))
        np.testing.assert_allclose(m @ m, -np.eye(2), atol=1e-12)
        psi = random_state(np.random.default_rng(5))
        hwp = WaveplateSpec(WaveplateKind.HALF, 0.0)
        assert apply_waveplate(apply_waveplate(psi, hwp), hwp).equals_up_to_phase(psi)

    def test_qwp45_on_right_circular_is_linear(self):
        out = apply_waveplate(make_scalar_mode(PolBasis.R, 0), QWP45)
        assert is_linear(out.amplitudes[:, 3])
        # with H = (R + L)/sqrt2 the 45 deg QWP takes R onto H
        lin = CIRC_TO_LIN @ out.amplitudes[:, 3]
        assert abs(lin[0]) == pytest.approx(1.0, abs=1e-12)

    def test_qwp0_on_right_circular_equal_magnitudes(self):
        m = waveplate_matrix(WaveplateSpec(WaveplateKind.QUARTER, 0.0))
        lin = CIRC_TO_LIN @ (m @ np.array([1.0, 0.0]))
        np.testing.assert_allclose(np.abs(lin), [S, S], atol=1e-12)
        assert is_linear(m @ np.array([1.0, 0.0]))

    def test_period_pi_in_angle(self):
        for kind in WaveplateKind:
            a = waveplate_matrix(WaveplateSpec(kind, 0.3))
            b = waveplate_matrix(WaveplateSpec(kind, 0.3 + np.pi))
            np.testing.assert_allclose(a, b, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-np.pi, np.pi), st.sampled_from(list(WaveplateKind)))
    def test_norm_preserved(self, seed, angle, kind):
        psi = random_state(np.random.default_rng(seed))
        out = apply_waveplate(psi, WaveplateSpec(kind, angle))
        assert out.norm() == pytest.approx(1.0, abs=1e-10)

    def test_operator_acts_on_polarization_only(self):
        op = waveplate_operator(QWP45)
        # no coupling between different OAM columns
        blocks = op.reshape(2, 7, 2, 7)
        off = blocks.copy()
        for i in range(7):
            off[:, i, :, i] = 0
        assert np.max(np.abs(off)) == 0


class TestAnalyzer:
    def test_h_passes_at_zero(self):
        psi = make_linear_mode(1, 0, ell=1)
        assert project_polarization(psi, 0.0).norm() == pytest.approx(1.0, abs=1e-12)

    def test_h_blocked_at_ninety(self):
        psi = make_linear_mode(1, 0, ell=1)
        assert project_polarization(psi, np.pi / 2).norm() == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_on_qwp_state_halves_norm(self):
        after_qwp = apply_waveplate(prepare_hybrid_state(1), QWP45)
        out = project_polarization(after_qwp, np.pi / 4)
        assert out.norm() ** 2 == pytest.approx(0.5, abs=1e-12)
        # remaining OAM part is an equal superposition of +1 and -1
        w = np.sum(np.abs(out.amplitudes) ** 2, axis=0)
        assert w[4] == pytest.approx(w[2], abs=1e-12)

    def test_qwp_output_overlap_with_h(self):
        after_qwp = apply_waveplate(prepare_hybrid_state(1), QWP45)
        assert project_polarization(after_qwp, 0.0).norm() ** 2 == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.0, 0.3, np.pi / 4, 2.0])
    def test_idempotent_rank_one(self, alpha):
        p = polarization_projector(AnalyzerSpec(alpha))
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-15)
        assert np.trace(p).real == pytest.approx(7.0)


class TestDelta:
    def test_constant(self):
        assert predict_delta() == pytest.approx(np.pi / 2, abs=1e-12)

    def test_matches_pipeline(self):
        rng = np.random.default_rng(6)
        psi = prepare_hybrid_state(1)
        delta = predict_delta()
        for _ in range(20):
            a, t = rng.uniform(0, np.pi), rng.uniform(0, 2 * np.pi)
            assert abs(detection_probability(psi, a, t) - analytic_probability(a, t, delta)) < 1e-10
