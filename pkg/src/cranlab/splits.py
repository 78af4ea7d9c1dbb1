"""Layer-2 functional split options."""

from dataclasses import dataclass
from typing import Dict, Tuple, Union

from .constants import (
    ASYNC_MAX_ONE_WAY_MS,
    SPLIT_A_MAX_ONE_WAY_MS,
    SPLIT_B_MAX_ONE_WAY_MS,
    ProtocolTiming,
    SplitId,
)
from .errors import InvalidConfig


@dataclass(frozen=True)
class SplitOption:
    """One RU/CU boundary inside Layer 2."""
    id: SplitId
    display_name: str
    timing: ProtocolTiming
    max_one_way_latency_ms: float
    centralization_gains: str
    pros: str
    cons: str

    @property
    def synchronous(self) -> bool:
        return self.timing is ProtocolTiming.SYNCHRONOUS


# Ordered from the lowest split (most centralized) upward
SPLIT_OPTIONS: Dict[SplitId, SplitOption] = {
    SplitId.L2_A: SplitOption(
        id=SplitId.L2_A,
        display_name="Split A (below MAC)",
        timing=ProtocolTiming.SYNCHRONOUS,
        max_one_way_latency_ms=SPLIT_A_MAX_ONE_WAY_MS,
        centralization_gains="C + centralized ICIC, scheduling",
        pros="High RRM gains possible",
        cons="Higher requirements on latency",
    ),
    SplitId.L2_B: SplitOption(
        id=SplitId.L2_B,
        display_name="Split B (MAC/RLC)",
        timing=ProtocolTiming.SYNCHRONOUS,
        max_one_way_latency_ms=SPLIT_B_MAX_ONE_WAY_MS,
        centralization_gains="None",
        pros="None",
        cons="Very high requirements on latency, additional signalling required",
    ),
    SplitId.L2_C: SplitOption(
        id=SplitId.L2_C,
        display_name="Split C (RLC/PDCP)",
        timing=ProtocolTiming.ASYNCHRONOUS,
        max_one_way_latency_ms=ASYNC_MAX_ONE_WAY_MS,
        centralization_gains="D + moderate processing gains",
        pros="Low requirements, fronthaul ciphering included",
        cons="Coordinated scheduling would require additional signalling",
    ),
    SplitId.L2_D: SplitOption(
        id=SplitId.L2_D,
        display_name="Split D (above PDCP)",
        timing=ProtocolTiming.ASYNCHRONOUS,
        max_one_way_latency_ms=ASYNC_MAX_ONE_WAY_MS,
        centralization_gains="Admission control, load balancing, SON functionality",
        pros="Low requirements on fronthaul and computational resources",
        cons="C-plane centralization only",
    ),
}


def get_split_option(split: Union[SplitId, str]) -> SplitOption:
    """Get the option for a split id or its name (``"L2_A"`` or ``"A"``)."""
    if isinstance(split, str):
        name = split.upper()
        name = name if name.startswith("L2_") else f"L2_{name}"
        try:
            split = SplitId(name)
        except ValueError as exc:
            raise InvalidConfig(f"unknown split {split!r}") from exc
    return SPLIT_OPTIONS[split]


def all_splits() -> Tuple[SplitOption, ...]:
    return tuple(SPLIT_OPTIONS.values())
