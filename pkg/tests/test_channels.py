import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qeraser.channels import (
    ChannelModel,
    ChannelSpecError,
    FiberChannelParams,
    apply_channel,
    dephasing_channel,
    dump_channel_spec,
    fiber_channel,
    free_space_channel,
    load_channel_spec,
    oam_crosstalk_unitary,
    params_from_spec,
    unitary_channel,
)
from qeraser.measurement import prepare_hybrid_state
from qeraser.spinorbit import SpinOrbitState


def random_state(rng, lmax=3):
    amps = rng.normal(size=(2, 2 * lmax + 1)) + 1j * rng.normal(size=(2, 2 * lmax + 1))
    return SpinOrbitState(amps, lmax).normalized()


params_strategy = st.builds(
    FiberChannelParams,
    epsilon_xt=st.floats(0, 1),
    pol_rotation=st.floats(-7, 7),
    intermodal_phase=st.floats(-7, 7),
    seed=st.integers(0, 2**32),
)


class TestFreeSpace:
    def test_identity_on_states(self):
        rng = np.random.default_rng(0)
        ch = free_space_channel()
        for _ in range(5):
            psi = random_state(rng)
            np.testing.assert_allclose(apply_channel(psi, ch), psi.density_matrix(), atol=1e-15)

    def test_composition(self):
        ch = free_space_channel().then(free_space_channel())
        assert len(ch.kraus) == 1
        np.testing.assert_allclose(ch.kraus[0], np.eye(14), atol=1e-15)

    def test_pure_state_gives_rank_one(self):
        rho = apply_channel(random_state(np.random.default_rng(1)), free_space_channel())
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.matrix_rank(rho, tol=1e-10) == 1


class TestFiber:
    def test_zero_params_is_identity(self):
        ch = fiber_channel(FiberChannelParams())
        np.testing.assert_allclose(ch.kraus[0], np.eye(14), atol=1e-12)

    def test_zero_params_matches_free_space_on_random_states(self):
        rng = np.random.default_rng(2)
        fib, free = fiber_channel(FiberChannelParams(seed=123)), free_space_channel()
        for _ in range(100):
            psi = random_state(rng)
            assert np.max(np.abs(apply_channel(psi, fib) - apply_channel(psi, free))) < 1e-10

    @settings(max_examples=40, deadline=None)
    @given(params_strategy)
    def test_trace_preserving(self, params):
        ch = fiber_channel(params)
        assert ch.trace_preservation_error() < 1e-9

    def test_unitary_preserves_purity(self):
        rng = np.random.default_rng(3)
        ch = fiber_channel(FiberChannelParams(0.2, 0.4, 1.0, 9))
        rho = apply_channel(random_state(rng), ch)
        assert np.trace(rho @ rho).real == pytest.approx(1.0, abs=1e-9)

    def test_pair_mixing_angle(self):
        # the +1 -> -1 transfer probability equals epsilon_xt on a leak-free pair
        eps = 0.3
        u = oam_crosstalk_unitary(FiberChannelParams(eps), lmax=1)
        assert abs(u[0, 2]) ** 2 == pytest.approx(eps, abs=1e-12)

    def test_leakage_outside_pair(self):
        u = oam_crosstalk_unitary(FiberChannelParams(0.05, seed=4))
        # weight leaving |+1> for |+2>
        assert abs(u[2 + 3, 1 + 3]) > 1e-3
        # mirror symmetry of the leak chains
        assert abs(u[2 + 3, 1 + 3]) == pytest.approx(abs(u[-2 + 3, -1 + 3]), abs=1e-12)

    def test_seed_changes_link_phases_only(self):
        a = oam_crosstalk_unitary(FiberChannelParams(0.05, seed=1))
        b = oam_crosstalk_unitary(FiberChannelParams(0.05, seed=2))
        assert not np.allclose(a, b)
        np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-12)

    @pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan")])
    def test_epsilon_range(self, bad):
        with pytest.raises(ChannelSpecError):
            FiberChannelParams(bad)


class TestDephasing:
    @pytest.mark.parametrize("phase", [0.0, 0.4, 1.3, np.pi])
    def test_coherence_scaled_by_cos(self, phase):
        psi = prepare_hybrid_state(1)
        rho = apply_channel(psi, dephasing_channel(1, phase))
        i_plus = 0 * 7 + 1 + 3  # (R, +1)
        i_minus = 1 * 7 - 1 + 3  # (L, -1)
        # 2x2 block: [[1/2, c/2], [c*/2, 1/2]] with c the original coherence (=1)
        block_in = psi.density_matrix()[np.ix_([i_plus, i_minus], [i_plus, i_minus])]
        block = rho[np.ix_([i_plus, i_minus], [i_plus, i_minus])]
        assert block[0, 1] == pytest.approx(block_in[0, 1] * math.cos(phase), abs=1e-12)
        assert block[0, 0] == pytest.approx(0.5, abs=1e-12)

    def test_trace_preserving_but_mixed(self):
        ch = dephasing_channel(1, 0.8)
        assert ch.is_trace_preserving()
        rho = apply_channel(prepare_hybrid_state(1), ch)
        assert np.trace(rho @ rho).real < 1 - 1e-3


class TestModel:
    def test_bad_shape(self):
        with pytest.raises(ValueError, match="shape"):
            ChannelModel((np.eye(3),))

    def test_empty(self):
        with pytest.raises(ValueError):
            ChannelModel(())

    def test_lossy_flagged(self):
        assert not unitary_channel(0.9 * np.eye(14)).is_trace_preserving()

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            apply_channel(np.eye(16) / 16, free_space_channel())


class TestSpecDocuments:
    def test_roundtrip(self, tmp_path):
        params = FiberChannelParams(0.0072, math.radians(10), math.pi, 77)
        path = tmp_path / "ch.json"
        dump_channel_spec(params, path, label="test-fiber")
        ch = load_channel_spec(path)
        assert ch.label == "test-fiber"
        assert ch.params.epsilon_xt == params.epsilon_xt
        assert ch.params.seed == 77
        assert ch.params.intermodal_phase == pytest.approx(math.pi)
        np.testing.assert_allclose(ch.kraus[0], fiber_channel(params).kraus[0], atol=1e-12)

    def test_identity_spec_loads_free_space(self, tmp_path):
        path = tmp_path / "free.json"
        path.write_text(json.dumps({"label": "free", "epsilon_xt": 0}))
        ch = load_channel_spec(path)
        np.testing.assert_array_equal(ch.kraus[0], np.eye(14))

    @pytest.mark.parametrize("doc,msg", [
        ({"epsilon_xt": 2.0}, "epsilon_xt"),
        ({"epsilon_xt": "x"}, "bad channel spec"),
        ({"seed": 1.5}, "seed"),
        ({"bogus": 1}, "unknown"),
        ([], "object"),
    ])
    def test_invalid(self, doc, msg):
        with pytest.raises(ChannelSpecError, match=msg):
            params_from_spec(doc)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ChannelSpecError, match="not valid JSON"):
            load_channel_spec(path)
