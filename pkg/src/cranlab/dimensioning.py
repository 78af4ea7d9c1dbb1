"""Fronthaul dimensioning: CPRI line rates and Layer-2 split latency budgets."""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Optional

from .constants import (
    CPRI_CONTROL_OVERHEAD,
    CPRI_LINE_CODING,
    CPRI_MAX_BITS,
    CPRI_MAX_LINE_RATE_BPS,
    CPRI_MIN_BITS,
    CPRI_OPTION_RATES_BPS,
    HARQ_ROUND_TRIP_BUDGET_MS,
    L2_CONTROL_OVERHEAD,
    SplitId,
)
from .errors import InvalidConfig, InvalidRange
from .splits import all_splits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CpriProfile:
    """Sampling and transport parameters of one CPRI link."""
    sample_rate: float
    bits_per_component: int
    antennas: int
    control_overhead_factor: Fraction = CPRI_CONTROL_OVERHEAD
    line_coding_factor: Fraction = CPRI_LINE_CODING

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise InvalidConfig(f"sample rate must be > 0, got {self.sample_rate}")
        if not CPRI_MIN_BITS <= self.bits_per_component <= CPRI_MAX_BITS:
            raise InvalidConfig(f"bits per component must be in {CPRI_MIN_BITS}..{CPRI_MAX_BITS}")
        if self.antennas < 1:
            raise InvalidConfig(f"need at least one antenna, got {self.antennas}")
        object.__setattr__(self, "control_overhead_factor", Fraction(self.control_overhead_factor))
        object.__setattr__(self, "line_coding_factor", Fraction(self.line_coding_factor))
        if self.control_overhead_factor < 1 or self.line_coding_factor < 1:
            raise InvalidConfig("overhead factors must be >= 1")


def cpri_line_rate(profile: CpriProfile) -> float:
    """Line rate in bit/s: fs x 2 x bits x antennas x control overhead x line coding."""
    rate = (Fraction(profile.sample_rate) * 2 * profile.bits_per_component * profile.antennas
            * profile.control_overhead_factor * profile.line_coding_factor)
    return float(rate)


def cpri_option_for(rate_bps: float) -> Optional[int]:
    """Smallest standard CPRI option carrying ``rate_bps``; None above 9.8 Gbps."""
    for option, capacity in sorted(CPRI_OPTION_RATES_BPS.items()):
        if rate_bps <= capacity:
            return option
    return None


def exceeds_cpri_ceiling(rate_bps: float) -> bool:
    return rate_bps > CPRI_MAX_LINE_RATE_BPS


def compressed_line_rate(profile: CpriProfile, compression_ratio: float) -> float:
    """Line rate once IQ samples are compressed by ``compression_ratio``."""
    if not compression_ratio >= 1:
        raise InvalidRange(f"compression ratio must be >= 1, got {compression_ratio}")
    return cpri_line_rate(profile) / compression_ratio


def max_one_way_latency_ms(processing_ms: float,
                           budget_ms: float = HARQ_ROUND_TRIP_BUDGET_MS) -> float:
    """Largest one-way fronthaul latency leaving room for CU processing."""
    if processing_ms < 0 or budget_ms <= 0:
        raise InvalidRange("processing must be >= 0 and the budget > 0")
    return max((budget_ms - processing_ms) / 2.0, 0.0)


@dataclass(frozen=True)
class SplitFeasibility:
    """HARQ and latency verdict for one split."""
    split: SplitId
    feasible: bool
    round_trip_ms: float
    remainder_ms: Optional[float]
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "split": self.split.value,
            "feasible": self.feasible,
            "round_trip_ms": self.round_trip_ms,
            "remainder_ms": self.remainder_ms,
            "reason": self.reason,
        }


def harq_budget_check(fronthaul_one_way_ms: float, processing_ms: float,
                      budget_ms: float = HARQ_ROUND_TRIP_BUDGET_MS) -> Dict[SplitId, SplitFeasibility]:
    """Check every Layer-2 split against its latency limit.

    Synchronous splits must close the HARQ loop: two fronthaul traversals
    plus CU processing below ``budget_ms``, and the one-way latency within
    the split's own limit. Asynchronous splits only need the latter.

    Args:
        fronthaul_one_way_ms: One-way fronthaul latency
        processing_ms: CU processing and frame building time
        budget_ms: HARQ round-trip budget

    Returns:
        Verdict per split
    """
    if fronthaul_one_way_ms < 0 or processing_ms < 0:
        raise InvalidRange("latencies must be >= 0")
    round_trip = 2.0 * fronthaul_one_way_ms + processing_ms
    verdicts = {}
    for option in all_splits():
        within_limit = fronthaul_one_way_ms <= option.max_one_way_latency_ms
        if option.synchronous:
            remainder = budget_ms - round_trip
            feasible = within_limit and remainder > 0
            if not within_limit:
                reason = f"one-way {fronthaul_one_way_ms} ms above {option.max_one_way_latency_ms} ms"
            elif remainder <= 0:
                reason = f"round trip {round_trip:.3f} ms misses the {budget_ms} ms HARQ budget"
            else:
                reason = f"{remainder:.3f} ms of HARQ budget left"
        else:
            remainder = None
            feasible = within_limit
            reason = ("within" if within_limit else "above") + \
                f" the {option.max_one_way_latency_ms} ms limit"
        verdicts[option.id] = SplitFeasibility(option.id, feasible, round_trip, remainder, reason)
    logger.debug(f"HARQ check at {fronthaul_one_way_ms} ms: "
                 f"{[s.value for s, v in verdicts.items() if v.feasible]} feasible")
    return verdicts


def split_c_bandwidth(user_plane_peak_bps: float) -> float:
    """Split C fronthaul rate: user-plane peak plus about 10 % control plane."""
    if not user_plane_peak_bps > 0:
        raise InvalidRange(f"user-plane peak must be > 0, got {user_plane_peak_bps}")
    return user_plane_peak_bps * (1.0 + L2_CONTROL_OVERHEAD)
