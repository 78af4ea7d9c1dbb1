"""Rational polyphase resampling of IQ frames."""

import logging
from fractions import Fraction
from typing import Tuple, Union

import numpy as np
import scipy.signal

from .constants import RESAMPLER_KAISER_BETA, RESAMPLER_REL_BANDWIDTH, RESAMPLER_TAPS_PER_PHASE
from .errors import InvalidRatio
from .iq_frame import IqFrame

logger = logging.getLogger(__name__)

RatioLike = Union[Fraction, int, str, Tuple[int, int]]


def as_ratio(ratio: RatioLike) -> Fraction:
    """Parse a positive rational ratio such as ``"3/4"`` or ``(3, 4)``."""
    if isinstance(ratio, float):
        raise InvalidRatio(f"use an exact rational instead of float {ratio}")
    try:
        if isinstance(ratio, tuple):
            value = Fraction(int(ratio[0]), int(ratio[1]))
        else:
            value = Fraction(ratio)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise InvalidRatio(f"invalid resampling ratio {ratio!r}") from exc
    if value <= 0:
        raise InvalidRatio(f"resampling ratio must be positive, got {value}")
    return value


def design_lowpass(up: int, down: int) -> np.ndarray:
    """Kaiser-windowed sinc anti-aliasing filter for an up/down resampler.

    Cutoff sits at 0.9 of the narrower of the two Nyquist bands, with 32 taps
    per polyphase branch.
    """
    max_rate = max(up, down)
    numtaps = RESAMPLER_TAPS_PER_PHASE * max_rate | 1
    return scipy.signal.firwin(numtaps, RESAMPLER_REL_BANDWIDTH / max_rate,
                               window=("kaiser", RESAMPLER_KAISER_BETA))


def resample(frame: IqFrame, ratio: RatioLike) -> IqFrame:
    """Resample a frame by ``ratio`` = new rate / old rate.

    Low-pass filtering and rate change run as one polyphase stage. The output
    full scale is widened if filter overshoot pushes a sample past it.

    Args:
        frame: Input frame
        ratio: Positive rational ratio

    Returns:
        Frame at ``frame.sample_rate * ratio``
    """
    value = as_ratio(ratio)
    new_rate = frame.sample_rate * value.numerator / value.denominator
    if len(frame) == 0:
        return IqFrame(frame.samples.copy(), new_rate, frame.full_scale)
    if value == 1:
        return IqFrame(frame.samples.copy(), frame.sample_rate, frame.full_scale)
    up, down = value.numerator, value.denominator
    taps = design_lowpass(up, down)
    out = scipy.signal.resample_poly(frame.samples, up, down, window=taps)
    logger.debug(f"Resampled {len(frame)} samples by {up}/{down} into {out.size} "
                 f"with {taps.size} taps")
    return IqFrame.widened(out, new_rate, frame.full_scale)
