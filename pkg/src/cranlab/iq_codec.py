"""Compressed fronthaul IQ codec.

Chain: resample, per-block power-of-two scaling, optional first-order
closed-loop prediction, scalar quantization (uniform or Lloyd-Max) and an
optional canonical Huffman stage. Decoding inverts every stage and returns a
frame at the original rate and length.
"""

import logging
import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .constants import (
    BASELINE_BITS_PER_COMPONENT,
    BITSTREAM_MAGIC,
    DEFAULT_BLOCK_LEN,
    MAX_BITS_PER_COMPONENT,
    MAX_LLOYD_MAX_BITS,
    MIN_BITS_PER_COMPONENT,
    QuantizerKind,
)
from .errors import InvalidConfig, InvalidRatio, MalformedBitstream, SchemaError
from .huffman import BitReader, BitWriter, CanonicalCode, empirical_entropy
from .iq_frame import IqFrame, component_peak, evm, sqnr_db
from .lloyd_max import lloyd_max_design
from .quantizer import component_bits_to_step
from .resampler import as_ratio, resample

logger = logging.getLogger(__name__)

MAX_EXPONENT = 255

# magic, then: quantizer, bits, flags, reserved, block_len, ratio up, ratio down,
# original count, coded count, sample rate, full scale, quantizer scale,
# predictor (re, im), payload bit count
_HEADER = struct.Struct(">4sBBBBIIIIIdddddQ")
_TRAILER = struct.Struct(">I")
_TABLE_ENTRY = struct.Struct(">IB")
_FLAG_NOISE_SHAPING = 0x01
_FLAG_ENTROPY = 0x02
_QUANTIZER_CODES = {QuantizerKind.UNIFORM: 0, QuantizerKind.LLOYD_MAX: 1}


@dataclass(frozen=True)
class CodecConfig:
    """Codec stage settings."""
    resample_ratio: Fraction = Fraction(1)
    block_len: int = DEFAULT_BLOCK_LEN
    quantizer: QuantizerKind = QuantizerKind.LLOYD_MAX
    bits_per_component: int = 8
    noise_shaping: bool = False
    entropy_stage: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "resample_ratio", as_ratio(self.resample_ratio))
        except InvalidRatio as exc:
            raise InvalidConfig(str(exc)) from exc
        object.__setattr__(self, "quantizer", QuantizerKind(self.quantizer))
        if self.block_len < 1:
            raise InvalidConfig(f"block length must be >= 1, got {self.block_len}")
        if not MIN_BITS_PER_COMPONENT <= self.bits_per_component <= MAX_BITS_PER_COMPONENT:
            raise InvalidConfig(f"bits per component must be in {MIN_BITS_PER_COMPONENT}.."
                                f"{MAX_BITS_PER_COMPONENT}, got {self.bits_per_component}")
        if self.quantizer is QuantizerKind.LLOYD_MAX and self.bits_per_component > MAX_LLOYD_MAX_BITS:
            raise InvalidConfig(f"Lloyd-Max tables stop at {MAX_LLOYD_MAX_BITS} bits")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "resample_ratio": str(self.resample_ratio),
            "block_len": self.block_len,
            "quantizer": self.quantizer.value,
            "bits_per_component": self.bits_per_component,
            "noise_shaping": self.noise_shaping,
            "entropy_stage": self.entropy_stage,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CodecConfig":
        """Create a config from its JSON structure."""
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown codec settings: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise SchemaError(f"invalid codec config: {exc}") from exc


def block_scale(frame: IqFrame, block_len: int) -> Tuple[IqFrame, np.ndarray]:
    """Scale each block by 2^e so its component peak lands in (M/2, M].

    Args:
        frame: Input frame, full scale M
        block_len: Samples per block; the last block may be short

    Returns:
        (scaled frame with the same full scale, uint8 exponent per block);
        all-zero blocks get 0
    """
    if block_len < 1:
        raise InvalidConfig(f"block length must be >= 1, got {block_len}")
    x = frame.samples
    n_blocks = -(-x.size // block_len)
    exponents = np.zeros(n_blocks, dtype=np.uint8)
    for b in range(n_blocks):
        block = x[b * block_len:(b + 1) * block_len]
        peak = component_peak(block) if block.size else 0.0
        if peak == 0.0:
            continue
        mantissa, exp = math.frexp(peak / frame.full_scale)
        e = -exp if mantissa > 0.5 else 1 - exp
        exponents[b] = min(max(e, 0), MAX_EXPONENT)
    scaled = _apply_exponents(x, exponents, block_len, 1)
    return IqFrame(scaled, frame.sample_rate, frame.full_scale), exponents


def block_descale(scaled: Union[IqFrame, np.ndarray], exponents: np.ndarray,
                  block_len: int) -> np.ndarray:
    """Exact inverse of :func:`block_scale`; also takes dequantized sample arrays."""
    samples = scaled.samples if isinstance(scaled, IqFrame) else np.asarray(scaled)
    return _apply_exponents(samples, exponents, block_len, -1)


def _apply_exponents(x: np.ndarray, exponents: np.ndarray, block_len: int, sign: int) -> np.ndarray:
    per_sample = np.repeat(exponents.astype(np.int64), block_len)[:x.size] * sign
    return np.ldexp(x.real, per_sample) + 1j * np.ldexp(x.imag, per_sample)


class _ScalarQuantizer:
    """Uniform or Lloyd-Max quantizer on one real component."""

    def __init__(self, kind: QuantizerKind, bits: int, full_scale: float, scale: float):
        self.kind = kind
        self.bits = bits
        self.n_levels = 2 ** bits
        if kind is QuantizerKind.LLOYD_MAX:
            self.table = lloyd_max_design(bits)
            self.scale = scale
        else:
            self.step = component_bits_to_step(bits, full_scale)
            self.full_scale = full_scale

    def quantize(self, v: np.ndarray) -> np.ndarray:
        if self.kind is QuantizerKind.LLOYD_MAX:
            return self.table.quantize(v / self.scale)
        idx = np.floor((v + self.full_scale) / self.step).astype(np.int64)
        return np.clip(idx, 0, self.n_levels - 1)

    def dequantize(self, idx: np.ndarray) -> np.ndarray:
        if self.kind is QuantizerKind.LLOYD_MAX:
            return self.table.dequantize(idx) * self.scale
        return -self.full_scale + (idx + 0.5) * self.step

    def design_mse(self) -> float:
        """Per-component error variance predicted by the design."""
        if self.kind is QuantizerKind.LLOYD_MAX:
            return self.table.mse * self.scale ** 2
        return self.step ** 2 / 12.0


def _estimate_predictor(x: np.ndarray) -> complex:
    """Least-squares first-order coefficient sum x[n] x*[n-1] / sum |x[n-1]|^2."""
    if x.size < 2:
        return 0j
    energy = float(np.sum(np.abs(x[:-1]) ** 2))
    if energy == 0:
        return 0j
    return complex(np.sum(x[1:] * np.conj(x[:-1])) / energy)


def _gain_steps(exponents: np.ndarray, block_len: int, n: int) -> np.ndarray:
    """2^(e_cur - e_prev) per sample, rescaling the previous reconstruction."""
    per_sample = np.repeat(exponents.astype(np.int64), block_len)[:n]
    diffs = np.zeros(n, dtype=np.int64)
    diffs[1:] = per_sample[1:] - per_sample[:-1]
    return np.ldexp(1.0, diffs)


def _predictive_encode(x: np.ndarray, coef: complex, gains: np.ndarray,
                       q: _ScalarQuantizer) -> Tuple[np.ndarray, np.ndarray]:
    idx_re = np.empty(x.size, dtype=np.int64)
    idx_im = np.empty(x.size, dtype=np.int64)
    recon = np.empty(x.size, dtype=np.complex128)
    prev = 0j
    for n in range(x.size):
        pred = coef * prev * gains[n]
        residual = x[n] - pred
        i_re = q.quantize(np.array([residual.real]))
        i_im = q.quantize(np.array([residual.imag]))
        idx_re[n], idx_im[n] = i_re[0], i_im[0]
        prev = pred + complex(q.dequantize(i_re)[0], q.dequantize(i_im)[0])
        recon[n] = prev
    return np.stack([idx_re, idx_im], axis=1).ravel(), recon


def _predictive_decode(indices: np.ndarray, coef: complex, gains: np.ndarray,
                       q: _ScalarQuantizer) -> np.ndarray:
    pairs = indices.reshape(-1, 2)
    recon = np.empty(pairs.shape[0], dtype=np.complex128)
    prev = 0j
    for n in range(pairs.shape[0]):
        pred = coef * prev * gains[n]
        prev = pred + complex(q.dequantize(pairs[n, 0:1])[0], q.dequantize(pairs[n, 1:2])[0])
        recon[n] = prev
    return recon


@dataclass(frozen=True, eq=False)
class CompressedBitstream:
    """Parsed form of an encoded frame."""
    config: CodecConfig
    original_sample_count: int
    coded_sample_count: int
    sample_rate: float
    full_scale: float
    quantizer_scale: float
    predictor: complex
    exponents: np.ndarray
    code: Optional[CanonicalCode]
    payload: bytes
    payload_bits: int

    def to_bytes(self) -> bytes:
        """Serialize to the bit-exact layout ending in a 32-bit total length."""
        cfg = self.config
        flags = (_FLAG_NOISE_SHAPING if cfg.noise_shaping else 0) | (
            _FLAG_ENTROPY if cfg.entropy_stage else 0)
        parts = [
            _HEADER.pack(
                BITSTREAM_MAGIC, _QUANTIZER_CODES[cfg.quantizer], cfg.bits_per_component, flags, 0,
                cfg.block_len, cfg.resample_ratio.numerator, cfg.resample_ratio.denominator,
                self.original_sample_count, self.coded_sample_count, self.sample_rate,
                self.full_scale, self.quantizer_scale, self.predictor.real, self.predictor.imag,
                self.payload_bits),
            self.exponents.astype(np.uint8).tobytes(),
        ]
        if cfg.entropy_stage:
            entries = self.code.ordered() if self.code else []
            parts.append(struct.pack(">I", len(entries)))
            parts.extend(_TABLE_ENTRY.pack(symbol, length) for length, symbol in entries)
        parts.append(self.payload)
        body = b"".join(parts)
        return body + _TRAILER.pack(len(body) + _TRAILER.size)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedBitstream":
        """Parse and validate a serialized bitstream."""
        if len(data) < _HEADER.size + _TRAILER.size:
            raise MalformedBitstream(f"bitstream too short: {len(data)} bytes")
        (total,) = _TRAILER.unpack(data[-_TRAILER.size:])
        if total != len(data):
            raise MalformedBitstream(f"length trailer {total} does not match {len(data)} bytes")
        (magic, quantizer, bits, flags, _, block_len, up, down, original, coded, rate,
         full_scale, scale, pred_re, pred_im, payload_bits) = _HEADER.unpack_from(data, 0)
        if magic != BITSTREAM_MAGIC:
            raise MalformedBitstream(f"bad magic {magic!r}")
        kinds = {v: k for k, v in _QUANTIZER_CODES.items()}
        if quantizer not in kinds or down == 0:
            raise MalformedBitstream("corrupt configuration block")
        try:
            cfg = CodecConfig(Fraction(up, down), block_len, kinds[quantizer], bits,
                              bool(flags & _FLAG_NOISE_SHAPING), bool(flags & _FLAG_ENTROPY))
        except InvalidConfig as exc:
            raise MalformedBitstream(f"corrupt configuration block: {exc}") from exc

        pos = _HEADER.size
        n_blocks = -(-coded // block_len)
        if pos + n_blocks > len(data) - _TRAILER.size:
            raise MalformedBitstream("exponent table truncated")
        exponents = np.frombuffer(data, dtype=np.uint8, count=n_blocks, offset=pos).copy()
        pos += n_blocks
        code = None
        if cfg.entropy_stage:
            if pos + 4 > len(data):
                raise MalformedBitstream("code table truncated")
            (n_entries,) = struct.unpack_from(">I", data, pos)
            pos += 4
            end = pos + n_entries * _TABLE_ENTRY.size
            if end > len(data) - _TRAILER.size:
                raise MalformedBitstream("code table truncated")
            lengths = {}
            for k in range(n_entries):
                symbol, length = _TABLE_ENTRY.unpack_from(data, pos + k * _TABLE_ENTRY.size)
                lengths[symbol] = length
            code = CanonicalCode(lengths)
            pos = end
        payload = data[pos:-_TRAILER.size]
        if len(payload) != -(-payload_bits // 8):
            raise MalformedBitstream(f"payload is {len(payload)} bytes, expected "
                                     f"{-(-payload_bits // 8)}")
        return cls(cfg, original, coded, rate, full_scale, scale, complex(pred_re, pred_im),
                   exponents, code, payload, payload_bits)


def encode(frame: IqFrame, cfg: CodecConfig) -> CompressedBitstream:
    """Compress a frame.

    Args:
        frame: Input frame
        cfg: Codec settings

    Returns:
        CompressedBitstream
    """
    coded_frame = resample(frame, cfg.resample_ratio)
    scaled_frame, exponents = block_scale(coded_frame, cfg.block_len)
    scaled = scaled_frame.samples
    n = scaled.size
    rms = math.sqrt(float(np.mean(np.abs(scaled) ** 2)) / 2.0) if n else 0.0
    scale = rms if rms > 0 else 1.0
    q = _ScalarQuantizer(cfg.quantizer, cfg.bits_per_component, coded_frame.full_scale, scale)

    if cfg.noise_shaping:
        coef = _estimate_predictor(scaled)
        indices, _ = _predictive_encode(scaled, coef, _gain_steps(exponents, cfg.block_len, n), q)
    else:
        coef = 0j
        indices = np.stack([q.quantize(scaled.real), q.quantize(scaled.imag)], axis=1).ravel()

    writer = BitWriter()
    code = None
    if cfg.entropy_stage:
        code = CanonicalCode.from_symbols(indices)
        writer.write_codes(indices, code)
    else:
        writer.write_fixed(indices, cfg.bits_per_component)

    logger.debug(f"Encoded {len(frame)} samples into {writer.n_bits} payload bits "
                 f"({cfg.quantizer.value}, {cfg.bits_per_component} bits)")
    return CompressedBitstream(cfg, len(frame), n, frame.sample_rate, coded_frame.full_scale,
                               scale, coef, exponents, code, writer.to_bytes(), writer.n_bits)


def decode_indices(bs: CompressedBitstream) -> np.ndarray:
    """Quantizer indices carried by the payload, interleaved I/Q."""
    reader = BitReader(bs.payload, bs.payload_bits)
    count = 2 * bs.coded_sample_count
    if bs.config.entropy_stage:
        indices = reader.read_codes(count, bs.code or CanonicalCode({}))
    else:
        indices = reader.read_fixed(count, bs.config.bits_per_component)
    if np.any(indices >= 2 ** bs.config.bits_per_component):
        raise MalformedBitstream("quantizer index out of range")
    return indices


def decode(bs: CompressedBitstream) -> IqFrame:
    """Reconstruct a frame at the original rate and sample count."""
    cfg = bs.config
    indices = decode_indices(bs)
    q = _ScalarQuantizer(cfg.quantizer, cfg.bits_per_component, bs.full_scale, bs.quantizer_scale)
    n = bs.coded_sample_count
    if cfg.noise_shaping:
        scaled = _predictive_decode(indices, bs.predictor, _gain_steps(bs.exponents, cfg.block_len, n), q)
    else:
        pairs = indices.reshape(-1, 2)
        scaled = q.dequantize(pairs[:, 0]) + 1j * q.dequantize(pairs[:, 1])
    coded = IqFrame.widened(block_descale(scaled, bs.exponents, cfg.block_len),
                            bs.sample_rate * cfg.resample_ratio.numerator / cfg.resample_ratio.denominator,
                            bs.full_scale)
    restored = resample(coded, 1 / cfg.resample_ratio).samples
    out = np.zeros(bs.original_sample_count, dtype=np.complex128)
    keep = min(out.size, restored.size)
    out[:keep] = restored[:keep]
    return IqFrame.widened(out, bs.sample_rate, bs.full_scale)


@dataclass
class CodecReport:
    """Size and distortion of one encoded frame."""
    original_samples: int
    encoded_bytes: int
    compression_ratio: float
    bits_per_component: float
    evm: float
    sqnr_db: float
    index_entropy: float
    predicted_evm: float
    baseline_bits: int = BASELINE_BITS_PER_COMPONENT

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def evaluate_codec(frame: IqFrame, cfg: CodecConfig) -> Tuple[CompressedBitstream, IqFrame, CodecReport]:
    """Encode, decode and measure a frame.

    The compression ratio compares the serialized size with 2 x 15 bits per
    input sample. The predicted EVM follows from the quantizer's design MSE
    relative to the per-component power at the quantizer input.
    """
    bs = encode(frame, cfg)
    data = bs.to_bytes()
    decoded = decode(CompressedBitstream.from_bytes(data))
    indices = decode_indices(bs)

    q = _ScalarQuantizer(cfg.quantizer, cfg.bits_per_component, bs.full_scale, bs.quantizer_scale)
    scaled_power = bs.quantizer_scale ** 2
    predicted = math.sqrt(q.design_mse() / scaled_power) if scaled_power > 0 else 0.0
    total_bits = 8 * len(data)
    report = CodecReport(
        original_samples=len(frame),
        encoded_bytes=len(data),
        compression_ratio=2 * BASELINE_BITS_PER_COMPONENT * len(frame) / total_bits,
        bits_per_component=total_bits / (2 * len(frame)),
        evm=evm(frame, decoded),
        sqnr_db=sqnr_db(frame, decoded),
        index_entropy=empirical_entropy(indices),
        predicted_evm=predicted,
    )
    logger.info(f"Codec {cfg.quantizer.value}/{cfg.bits_per_component}b ratio "
                f"{report.compression_ratio:.2f}, EVM {report.evm:.2%}")
    return bs, decoded, report
