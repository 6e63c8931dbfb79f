import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dmsparse.codec import (AdmParams, Bitstream, SamplingMask, adm_encode, bernoulli_mask,
                            dm_decode, dm_encode, extract_mask, iid_model_sample, masked_signal,
                            read_bitstream, write_bitstream)

frames = arrays(np.float64, st.integers(2, 200), elements=st.floats(-1, 1))


# ---------------------------------------------------------------------------
# fixed-step DM
# ---------------------------------------------------------------------------


class TestDmEncode:
    def test_zero_input_alternates(self):
        bits, stair = dm_encode(np.zeros(6), 0.1)
        assert bits.symbols.tolist() == [1, -1, 1, -1, 1, -1]
        np.testing.assert_allclose(stair.values, [0.1, 0, 0.1, 0, 0.1, 0], atol=1e-15)

    def test_ramp_overloads(self):
        n = np.arange(20)
        bits, stair = dm_encode(0.5 * n, 0.1)
        assert np.all(bits.symbols == 1)
        np.testing.assert_allclose(stair.values, 0.1 * (n + 1))

    def test_sign_of_zero_is_plus(self):
        bits, _ = dm_encode([0.0], 0.5)
        assert bits.symbols[0] == 1

    @pytest.mark.parametrize("delta", [0.0, -0.1, np.nan, np.inf])
    def test_bad_delta(self, delta):
        with pytest.raises(ValueError):
            dm_encode(np.zeros(4), delta)

    @settings(max_examples=60, deadline=None)
    @given(frames, st.floats(1e-3, 0.5))
    def test_granular_error_bounded(self, x, delta):
        # input moves less than a step per sample, so there is no overload
        # and the staircase stays within one step of it
        x = x * delta * 0.4
        _, stair = dm_encode(x, delta)
        assert np.max(np.abs(stair.values - x)) <= delta + 1e-12


class TestDmDecode:
    def test_hand_example(self):
        stair = dm_decode(Bitstream([1, 1, -1], 0.1))
        np.testing.assert_allclose(stair.values, [0.1, 0.2, 0.1])

    def test_all_plus(self):
        stair = dm_decode(Bitstream(np.ones(50), 0.02))
        assert stair.values[-1] == pytest.approx(50 * 0.02)

    def test_rejects_bad_symbols(self):
        with pytest.raises(ValueError):
            dm_decode(Bitstream([1, 0, -1], 0.1))

    @settings(max_examples=100, deadline=None)
    @given(frames, st.floats(1e-4, 0.2))
    def test_bit_exact_with_encoder(self, x, delta):
        bits, stair = dm_encode(x, delta)
        assert np.array_equal(dm_decode(bits).values, stair.values)


# ---------------------------------------------------------------------------
# adaptive DM
# ---------------------------------------------------------------------------


class TestAdm:
    def test_defaults(self):
        p = AdmParams(0.16)
        assert p.growth == 1.5 and p.delta_min == 0.01 and p.delta_max == pytest.approx(2.56)

    @pytest.mark.parametrize("kw", [dict(growth=1.0), dict(delta_min=0.5), dict(delta_max=0.05)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AdmParams(0.1, **kw)

    def test_alternating_input_shrinks_step(self):
        # a constant at the two-level fixed point c = d0 K / (1 + K) makes
        # the staircase straddle it from the first sample on
        d0, K = 0.1, 1.5
        c = d0 * K / (1 + K)
        bits, stair = adm_encode(np.full(40, c), AdmParams(d0, growth=K))
        assert np.all(bits.symbols[1:] * bits.symbols[:-1] == -1)
        n = np.arange(40)
        np.testing.assert_allclose(stair.delta_trace, np.maximum(d0 * K ** -n, d0 / 16))

    def test_steep_ramp_grows_step(self):
        p = AdmParams(0.01)
        _, stair = adm_encode(np.arange(30.0), p)
        expected = np.minimum(0.01 * 1.5 ** np.arange(30), p.delta_max)
        np.testing.assert_allclose(stair.delta_trace, expected)

    @settings(max_examples=60, deadline=None)
    @given(frames, st.floats(1e-3, 0.1))
    def test_bit_exact_decode(self, x, d0):
        bits, stair = adm_encode(x, AdmParams(d0))
        back = dm_decode(bits)
        assert np.array_equal(back.values, stair.values)
        assert np.array_equal(back.delta_trace, stair.delta_trace)

    @settings(max_examples=60, deadline=None)
    @given(frames, st.floats(1e-3, 0.1))
    def test_steps_stay_clamped(self, x, d0):
        p = AdmParams(d0)
        _, stair = adm_encode(x, p)
        assert np.all(stair.delta_trace >= p.delta_min) and np.all(stair.delta_trace <= p.delta_max)


# ---------------------------------------------------------------------------
# masks and the missing-sampling view
# ---------------------------------------------------------------------------


class TestExtractMask:
    def test_hand_example(self):
        assert extract_mask(np.array([1, -1, 1, 1])).d.tolist() == [True, True, False, False]

    def test_overload_keeps_nothing(self):
        assert not extract_mask(np.ones(10, dtype=np.int8)).d.any()

    def test_alternation_keeps_all_but_last(self):
        d = extract_mask(np.array([1, -1] * 5)).d
        assert d[:-1].all() and not d[-1]

    def test_too_short(self):
        with pytest.raises(ValueError):
            extract_mask(np.array([1]))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from([-1, 1]), min_size=2, max_size=100))
    def test_rule(self, b):
        b = np.array(b)
        d = extract_mask(b).d
        assert not d[-1]
        assert np.array_equal(d[:-1], b[:-1] != b[1:])


class TestMaskedSignal:
    def test_hand_example(self):
        m = masked_signal(np.array([1.0, 2.0, 3.0]), SamplingMask([0, 1, 0]))
        assert m.values.tolist() == [0.0, 2.0, 0.0]
        assert m.retained.tolist() == [2.0]

    def test_all_ones_and_zeros(self):
        y = np.array([1.0, -2.0])
        assert masked_signal(y, SamplingMask([1, 1])).values.tolist() == y.tolist()
        assert masked_signal(y, SamplingMask([0, 0])).values.tolist() == [0.0, 0.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            masked_signal(np.ones(3), SamplingMask([1, 0]))


class TestBernoulli:
    def test_extremes(self):
        assert not bernoulli_mask(100, 0.0, 1).d.any()
        assert bernoulli_mask(100, 1.0, 1).d.all()

    def test_concentration(self):
        assert abs(bernoulli_mask(100_000, 0.46, 3).rate - 0.46) <= 0.005

    def test_seeded(self):
        assert np.array_equal(bernoulli_mask(50, 0.5, 9).d, bernoulli_mask(50, 0.5, 9).d)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            bernoulli_mask(10, 1.5, 0)


class TestIidModel:
    def test_degenerate(self, rng):
        x = rng.standard_normal(32)
        s = iid_model_sample(x, 1.0, 0.0, 0)
        assert np.array_equal(s.values, x)
        assert not iid_model_sample(x, 0.0, 0.1, 0).values.any()

    def test_pointwise_mean(self, rng):
        x = rng.standard_normal(8)
        draws = np.array([iid_model_sample(x, 0.3, 0.1, s).values for s in range(20_000)])
        # standard error per sample is below 0.006 here
        np.testing.assert_allclose(draws.mean(axis=0), 0.3 * x, atol=0.03)

    def test_q_is_half_step(self):
        s = iid_model_sample(np.zeros(100), 0.5, 0.2, 4)
        assert set(np.round(np.abs(s.q), 12)) == {0.1}


# ---------------------------------------------------------------------------
# bitstream files
# ---------------------------------------------------------------------------


class TestBitstreamFile:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=70), st.floats(1e-4, 1))
    def test_round_trip(self, tmp_path_factory, symbols, delta):
        path = tmp_path_factory.mktemp("bits") / "a.dmbs"
        write_bitstream(path, Bitstream(symbols, delta))
        back = read_bitstream(path)
        assert back.symbols.tolist() == symbols and back.delta == delta and not back.adaptive

    def test_adaptive_flag(self, tmp_path):
        bits, stair = adm_encode(np.sin(np.arange(100) / 5), AdmParams(0.05))
        write_bitstream(tmp_path / "a.dmbs", bits)
        back = read_bitstream(tmp_path / "a.dmbs")
        assert back.adaptive
        assert np.array_equal(dm_decode(back).values, stair.values)

    def test_msb_first(self, tmp_path):
        write_bitstream(tmp_path / "a.dmbs", Bitstream([1, -1, -1, -1, -1, -1, -1, -1, 1], 0.1))
        raw = (tmp_path / "a.dmbs").read_bytes()
        assert raw[:4] == b"DMBS" and raw[-2:] == bytes([0x80, 0x80])

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"RIFF" + bytes(20))
        with pytest.raises(ValueError, match="magic"):
            read_bitstream(tmp_path / "x")

    def test_truncated(self, tmp_path):
        write_bitstream(tmp_path / "a", Bitstream(np.ones(64), 0.1))
        raw = (tmp_path / "a").read_bytes()
        (tmp_path / "b").write_bytes(raw[:-1])
        (tmp_path / "c").write_bytes(raw[:10])
        for name in "bc":
            with pytest.raises(ValueError):
                read_bitstream(tmp_path / name)
