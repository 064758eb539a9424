import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeraser.spinorbit import (
    CIRC_TO_LIN,
    DEFAULT_LMAX,
    LIN_TO_CIRC,
    ModeFamily,
    PolBasis,
    SpinOrbitState,
    TruncationError,
    VectorModeSpec,
    inner_product,
    make_linear_mode,
    make_scalar_mode,
    make_vector_mode,
    state_from_records,
)

S = 1 / np.sqrt(2)


def random_state(rng, lmax=DEFAULT_LMAX):
    amps = rng.normal(size=(2, 2 * lmax + 1)) + 1j * rng.normal(size=(2, 2 * lmax + 1))
    return SpinOrbitState(amps, lmax).normalized()


class TestVectorModes:
    def test_tm01_amplitudes(self):
        psi = make_vector_mode(VectorModeSpec(ModeFamily.TM01))
        expected = np.zeros((2, 7), dtype=complex)
        expected[0, 1 + 3] = S
        expected[1, -1 + 3] = S
        np.testing.assert_allclose(psi.amplitudes, expected, atol=1e-15)

    def test_te01_amplitudes(self):
        psi = make_vector_mode(VectorModeSpec.named("TE01"))
        assert psi.amplitude(PolBasis.R, 1) == pytest.approx(S)
        assert psi.amplitude(PolBasis.L, -1) == pytest.approx(-S, abs=1e-15)
        assert np.count_nonzero(np.abs(psi.amplitudes) > 1e-15) == 2

    def test_custom_ell_zero_is_linear_gaussian(self):
        psi = make_vector_mode(VectorModeSpec(ModeFamily.CUSTOM, ell=0, zeta=0.0))
        # (|R> + |L>)/sqrt2 is |H>
        lin = psi.linear_amplitudes()
        assert abs(lin[0, 3]) == pytest.approx(1.0)
        assert abs(lin[1, 3]) == pytest.approx(0.0, abs=1e-15)

    def test_family_overrides_custom_fields(self):
        spec = VectorModeSpec(ModeFamily.HE21_ODD, ell=3, zeta=0.2)
        assert (spec.ell, spec.zeta) == (-1, np.pi)

    def test_four_modes_pairwise_orthogonal(self):
        modes = [make_vector_mode(VectorModeSpec(f)) for f in
                 (ModeFamily.TM01, ModeFamily.TE01, ModeFamily.HE21_EVEN, ModeFamily.HE21_ODD)]
        for a, b in itertools.combinations(modes, 2):
            assert abs(inner_product(a, b)) < 1e-12
        for a in modes:
            assert inner_product(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(TruncationError):
            make_vector_mode(VectorModeSpec(ModeFamily.CUSTOM, ell=4))


class TestScalarModes:
    def test_examples(self):
        psi = make_scalar_mode(PolBasis.L, -1)
        assert psi.amplitude(PolBasis.L, -1) == 1.0
        assert psi.norm() == 1.0
        assert make_scalar_mode(PolBasis.R, 0).amplitude(PolBasis.R, 0) == 1.0

    def test_range_error(self):
        with pytest.raises(TruncationError, match="4"):
            make_scalar_mode(PolBasis.R, DEFAULT_LMAX + 1)

    def test_non_integer_ell(self):
        with pytest.raises(TruncationError):
            make_scalar_mode(PolBasis.R, 0.5)

    def test_larger_truncation(self):
        psi = make_scalar_mode(PolBasis.R, 10, lmax=10)
        assert psi.dim == 42


class TestState:
    def test_immutable(self):
        psi = make_scalar_mode(PolBasis.R, 0)
        with pytest.raises(ValueError):
            psi.amplitudes[0, 0] = 1.0

    def test_shape_check(self):
        with pytest.raises(ValueError, match="shape"):
            SpinOrbitState(np.zeros((2, 5)), lmax=3)

    def test_flat_index_order(self):
        psi = make_scalar_mode(PolBasis.L, 2)
        assert np.flatnonzero(psi.vector).tolist() == [1 * 7 + 2 + 3]

    def test_global_phase_equality(self):
        rng = np.random.default_rng(1)
        psi = random_state(rng)
        other = SpinOrbitState(psi.amplitudes * np.exp(0.7j), psi.lmax)
        assert psi.equals_up_to_phase(other)
        assert not psi.equals_up_to_phase(random_state(rng))

    def test_json_roundtrip(self):
        psi = random_state(np.random.default_rng(2))
        back = state_from_records(json.loads(psi.to_json()))
        np.testing.assert_array_equal(back.amplitudes, psi.amplitudes)

    def test_normalize_zero(self):
        with pytest.raises(ValueError):
            SpinOrbitState(np.zeros((2, 7))).normalized()

    def test_inner_product_dimension_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(make_scalar_mode(PolBasis.R, 0), make_scalar_mode(PolBasis.R, 0, lmax=4))


class TestBasis:
    def test_conversion_matrices_unitary(self):
        np.testing.assert_allclose(LIN_TO_CIRC @ CIRC_TO_LIN, np.eye(2), atol=1e-15)

    def test_h_and_v(self):
        h = make_linear_mode(1, 0)
        v = make_linear_mode(0, 1)
        assert h.amplitude(PolBasis.R, 0) == pytest.approx(S)
        assert h.amplitude(PolBasis.L, 0) == pytest.approx(S)
        assert v.amplitude(PolBasis.R, 0) == pytest.approx(-1j * S)
        assert v.amplitude(PolBasis.L, 0) == pytest.approx(1j * S)
        assert abs(inner_product(h, v)) < 1e-15

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_roundtrip_circular_linear(self, seed):
        psi = random_state(np.random.default_rng(seed))
        back = LIN_TO_CIRC @ psi.linear_amplitudes()
        assert np.max(np.abs(back - psi.amplitudes)) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_inner_product_self_is_one(self, seed):
        psi = random_state(np.random.default_rng(seed))
        assert inner_product(psi, psi) == pytest.approx(1.0, abs=1e-12)
