from fractions import Fraction

import numpy as np
import pytest

from cranlab.constants import QuantizerKind
from cranlab.errors import InvalidConfig, MalformedBitstream, SchemaError
from cranlab.iq_codec import (
    CodecConfig,
    CompressedBitstream,
    block_descale,
    block_scale,
    decode,
    decode_indices,
    encode,
    evaluate_codec,
)
from cranlab.iq_frame import IqFrame, ar1_frame, synthetic_ofdm_frame

RATE = 15.36e6


@pytest.fixture(scope="module")
def ofdm():
    return synthetic_ofdm_frame(16384, seed=11)


class TestBlockScaling:

    def test_quarter_scale_block(self):
        frame = IqFrame(np.full(4, 0.25 + 0.1j), RATE, 1.0)
        scaled, exps = block_scale(frame, 4)
        assert exps.tolist() == [2]
        assert isinstance(scaled, IqFrame)
        assert scaled.full_scale == frame.full_scale
        assert np.allclose(scaled.samples, frame.samples * 4)

    def test_near_full_scale_block(self):
        _, exps = block_scale(IqFrame(np.array([0.9, -0.2j]), RATE, 1.0), 2)
        assert exps.tolist() == [0]

    def test_zero_block(self):
        frame = IqFrame(np.array([0, 0, 0.3, 0.1], dtype=complex), RATE, 1.0)
        _, exps = block_scale(frame, 2)
        assert exps[0] == 0

    def test_peaks_land_in_upper_half(self, ofdm):
        scaled, _ = block_scale(ofdm, 32)
        for b in range(0, len(ofdm), 32):
            block = scaled.samples[b:b + 32]
            peak = max(np.max(np.abs(block.real)), np.max(np.abs(block.imag)))
            assert 0.5 < peak <= 1.0

    def test_exact_inverse(self, ofdm):
        scaled, exps = block_scale(ofdm, 20)
        assert np.array_equal(block_descale(scaled, exps, 20), ofdm.samples)


class TestCodecConfig:

    def test_lloyd_max_bit_limit(self):
        with pytest.raises(InvalidConfig):
            CodecConfig(bits_per_component=9, quantizer=QuantizerKind.LLOYD_MAX)
        CodecConfig(bits_per_component=12, quantizer=QuantizerKind.UNIFORM)

    def test_float_ratio_rejected(self):
        with pytest.raises(InvalidConfig):
            CodecConfig(resample_ratio=0.75)

    def test_dict_round_trip(self):
        cfg = CodecConfig(resample_ratio=Fraction(3, 4), bits_per_component=6,
                          quantizer=QuantizerKind.UNIFORM, noise_shaping=True)
        assert CodecConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_setting(self):
        with pytest.raises(SchemaError):
            CodecConfig.from_dict({"bits": 8})


class TestCodecQuality:

    def test_resampled_lloyd_max_operating_point(self, ofdm):
        cfg = CodecConfig(resample_ratio=Fraction(3, 4), bits_per_component=7,
                          quantizer=QuantizerKind.LLOYD_MAX, entropy_stage=True)
        _, decoded, report = evaluate_codec(ofdm, cfg)
        assert len(decoded) == len(ofdm)
        assert report.compression_ratio >= 2.5
        assert report.evm <= 0.08

    def test_single_block_evm_matches_design(self):
        frame = synthetic_ofdm_frame(8192, seed=5)
        cfg = CodecConfig(block_len=8192, bits_per_component=4)
        _, _, report = evaluate_codec(frame, cfg)
        assert report.evm == pytest.approx(report.predicted_evm, rel=0.2)

    def test_more_bits_never_lower_sqnr(self, ofdm):
        sqnrs = [evaluate_codec(ofdm, CodecConfig(quantizer=QuantizerKind.UNIFORM,
                                                  bits_per_component=b))[2].sqnr_db
                 for b in range(4, 11)]
        assert all(b >= a for a, b in zip(sqnrs, sqnrs[1:]))

    def test_prediction_lowers_index_entropy(self):
        frame = ar1_frame(8192, 0.9, seed=2)
        direct = CodecConfig(quantizer=QuantizerKind.UNIFORM, bits_per_component=8)
        shaped = CodecConfig(quantizer=QuantizerKind.UNIFORM, bits_per_component=8,
                             noise_shaping=True)
        _, _, plain = evaluate_codec(frame, direct)
        _, _, predicted = evaluate_codec(frame, shaped)
        assert predicted.index_entropy < plain.index_entropy
        assert predicted.evm < 0.05

    def test_fixed_length_payload(self, ofdm):
        cfg = CodecConfig(quantizer=QuantizerKind.UNIFORM, bits_per_component=9,
                          entropy_stage=False)
        bs = encode(ofdm, cfg)
        assert bs.payload_bits == 2 * len(ofdm) * 9
        assert bs.code is None

    def test_report_fields(self, ofdm):
        _, _, report = evaluate_codec(ofdm, CodecConfig(bits_per_component=5))
        data = report.to_dict()
        assert data["baseline_bits"] == 15
        assert data["bits_per_component"] == pytest.approx(15 / report.compression_ratio)


class TestBitstream:

    def test_bytes_are_stable(self, ofdm):
        bs = encode(ofdm, CodecConfig(resample_ratio=Fraction(3, 4), bits_per_component=6))
        data = bs.to_bytes()
        assert data[:4] == b"CIQ1"
        assert CompressedBitstream.from_bytes(data).to_bytes() == data

    def test_decode_from_parsed_bytes(self, ofdm):
        cfg = CodecConfig(bits_per_component=6, noise_shaping=True)
        bs = encode(ofdm, cfg)
        parsed = CompressedBitstream.from_bytes(bs.to_bytes())
        assert np.array_equal(decode_indices(parsed), decode_indices(bs))
        assert np.array_equal(decode(parsed).samples, decode(bs).samples)

    def test_truncated(self, ofdm):
        data = encode(ofdm, CodecConfig()).to_bytes()
        with pytest.raises(MalformedBitstream):
            CompressedBitstream.from_bytes(data[:-10])

    def test_bad_magic(self, ofdm):
        data = bytearray(encode(ofdm, CodecConfig()).to_bytes())
        data[0:4] = b"XXXX"
        with pytest.raises(MalformedBitstream):
            CompressedBitstream.from_bytes(bytes(data))

    def test_too_short(self):
        with pytest.raises(MalformedBitstream):
            CompressedBitstream.from_bytes(b"CIQ1")


def test_lossless_stages_round_trip_on_random_frames():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 200))
        samples = 0.3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        frame = IqFrame.widened(samples, RATE, 1.0)
        block_len = int(rng.integers(1, 40))
        scaled, exps = block_scale(frame, block_len)
        assert np.array_equal(block_descale(scaled, exps, block_len), frame.samples)

        cfg = CodecConfig(block_len=block_len, bits_per_component=int(rng.integers(2, 9)),
                          quantizer=QuantizerKind.UNIFORM, entropy_stage=bool(rng.integers(2)))
        bs = encode(frame, cfg)
        parsed = CompressedBitstream.from_bytes(bs.to_bytes())
        assert np.array_equal(decode_indices(parsed), decode_indices(bs))
