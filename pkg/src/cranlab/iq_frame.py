"""IQ sample frames, synthetic test signals and distortion metrics."""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt

from .errors import InvalidRange, MalformedBitstream

logger = logging.getLogger(__name__)

LTE_10MHZ_SAMPLE_RATE = 15.36e6
LTE_10MHZ_OCCUPIED = 9e6 / 15.36e6
# RMS of synthetic frames relative to full scale (12 dB back-off)
SYNTHETIC_BACKOFF = 0.25


@dataclass(frozen=True, eq=False)
class IqFrame:
    """Complex baseband samples with their rate and full-scale amplitude."""
    samples: np.ndarray
    sample_rate: float
    full_scale: float = 1.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(samples)):
            raise InvalidRange("IQ samples must be finite")
        if not (self.sample_rate > 0 and self.full_scale > 0):
            raise InvalidRange("sample rate and full scale must be > 0")
        if samples.size and component_peak(samples) > self.full_scale:
            raise InvalidRange(f"component peak {component_peak(samples):.6g} exceeds "
                               f"full scale {self.full_scale:.6g}")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def widened(cls, samples: npt.ArrayLike, sample_rate: float,
                full_scale: float = 1.0) -> "IqFrame":
        """Frame whose full scale is raised to the sample peak when needed."""
        samples = np.asarray(samples, dtype=np.complex128).ravel()
        peak = component_peak(samples) if samples.size else 0.0
        return cls(samples, sample_rate, max(full_scale, peak))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def power(self) -> float:
        """Mean |x|^2."""
        return float(np.mean(np.abs(self.samples) ** 2)) if self.samples.size else 0.0

    def with_samples(self, samples: np.ndarray) -> "IqFrame":
        return replace(self, samples=samples)


def component_peak(samples: np.ndarray) -> float:
    """Largest |Re| or |Im|."""
    return float(max(np.max(np.abs(samples.real)), np.max(np.abs(samples.imag))))


def synthetic_ofdm_frame(n: int, sample_rate: float = LTE_10MHZ_SAMPLE_RATE,
                         occupied_fraction: float = LTE_10MHZ_OCCUPIED, seed: int = 0,
                         full_scale: float = 1.0) -> IqFrame:
    """Band-limited complex Gaussian frame, a stand-in for OFDM time samples.

    Args:
        n: Number of samples
        sample_rate: Hz
        occupied_fraction: Occupied share of the sampled bandwidth, centred on DC
        seed: Generator seed
        full_scale: Amplitude limit; RMS sits 12 dB below it

    Returns:
        IqFrame
    """
    if n < 1 or not 0 < occupied_fraction <= 1:
        raise InvalidRange("need n >= 1 and an occupied fraction in (0, 1]")
    rng = np.random.default_rng(seed)
    spectrum = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    freqs = np.fft.fftfreq(n)
    spectrum[np.abs(freqs) > occupied_fraction / 2] = 0.0
    x = np.fft.ifft(spectrum)
    rms = math.sqrt(np.mean(np.abs(x) ** 2))
    x *= SYNTHETIC_BACKOFF * full_scale / rms
    peak = component_peak(x)
    if peak > full_scale:
        x *= full_scale / peak
    return IqFrame(x, sample_rate, full_scale)


def ar1_frame(n: int, rho: float, seed: int = 0, sample_rate: float = LTE_10MHZ_SAMPLE_RATE,
              full_scale: float = 1.0) -> IqFrame:
    """First-order autoregressive complex Gaussian frame with coefficient ``rho``."""
    if not -1 < rho < 1:
        raise InvalidRange(f"AR(1) coefficient must lie in (-1, 1), got {rho}")
    rng = np.random.default_rng(seed)
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt((1 - rho ** 2) / 2)
    x = np.empty(n, dtype=np.complex128)
    prev = 0.0
    for k in range(n):
        prev = rho * prev + w[k]
        x[k] = prev
    x *= SYNTHETIC_BACKOFF * full_scale / math.sqrt(np.mean(np.abs(x) ** 2))
    return IqFrame.widened(x, sample_rate, full_scale)


def evm(reference: IqFrame, test: IqFrame) -> float:
    """RMS error vector magnitude relative to the reference power."""
    ref, out = reference.samples, test.samples
    if ref.size != out.size:
        raise InvalidRange(f"frames differ in length: {ref.size} vs {out.size}")
    power = float(np.sum(np.abs(ref) ** 2))
    if power == 0:
        raise InvalidRange("reference frame has zero power")
    return math.sqrt(float(np.sum(np.abs(ref - out) ** 2)) / power)


def sqnr_db(reference: IqFrame, test: IqFrame) -> float:
    """Signal to quantization noise ratio in dB; infinite for identical frames."""
    e = evm(reference, test)
    return math.inf if e == 0 else -20.0 * math.log10(e)


def read_raw_iq(path: Union[str, Path], sample_rate: float, full_scale: float = 1.0) -> IqFrame:
    """Read interleaved little-endian float32 I/Q pairs."""
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2:
        raise MalformedBitstream(f"{path}: odd number of float32 values")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return IqFrame.widened(samples, sample_rate, full_scale)


def write_raw_iq(frame: IqFrame, path: Union[str, Path]) -> None:
    """Write interleaved little-endian float32 I/Q pairs."""
    raw = np.empty(2 * len(frame), dtype="<f4")
    raw[0::2] = frame.samples.real
    raw[1::2] = frame.samples.imag
    raw.tofile(path)
