"""Frame-by-frame RU activation with drift-plus-penalty control.

Each frame picks the RU activation set minimizing
sum_i Q_i(t) * (-r_i) + V * g, where r_i come from the rate engines on the
channel restricted to the active RUs and g is the power spent by them.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import (
    DEFAULT_FRAME_BITS,
    DEFAULT_P_STATIC,
    EXHAUSTIVE_ACTION_LIMIT,
    ChannelMode,
    FronthaulLink,
    LinkDirection,
    Precoder,
)
from .downlink import dl_rate_dpc, dl_rate_linear, zero_forcing_plan
from .errors import InvalidConfig
from .quantizer import fit_quantizers
from .scenario import ChannelRealization, ClusterConfig, generate_channel
from .uplink import default_decompression_order, ul_rate_sic, weighted_decoding_order

logger = logging.getLogger(__name__)

# Key component separating arrival draws from channel draws
_ARRIVAL_STREAM = 99


@dataclass(frozen=True)
class RrmPolicyConfig:
    """Control parameters of the simulation.

    ``p_tx_ul`` is the per-RU transmit-chain cost charged in the uplink; in
    the downlink each active RU is charged its transmitted power instead.
    """
    arrival_means: Tuple[float, ...]
    v: float = 1.0
    horizon: int = 100
    link: LinkDirection = LinkDirection.UPLINK
    p_static: float = DEFAULT_P_STATIC
    p_tx_ul: float = 0.0
    frame_bits: float = DEFAULT_FRAME_BITS
    precoder: Precoder = Precoder.DPC
    channel_mode: ChannelMode = ChannelMode.TDD_RECIPROCAL
    exhaustive_limit: int = EXHAUSTIVE_ACTION_LIMIT
    initial_queues: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "arrival_means", tuple(float(a) for a in self.arrival_means))
        if self.v < 0:
            raise InvalidConfig(f"V must be >= 0, got {self.v}")
        if self.horizon < 1:
            raise InvalidConfig(f"horizon must be >= 1 frame, got {self.horizon}")
        if any(a < 0 for a in self.arrival_means):
            raise InvalidConfig("arrival means must be >= 0")
        if self.p_static < 0 or self.p_tx_ul < 0 or self.frame_bits <= 0:
            raise InvalidConfig("costs must be >= 0 and frame bits > 0")
        if self.initial_queues is not None and any(q < 0 for q in self.initial_queues):
            raise InvalidConfig("initial queues must be >= 0")


@dataclass(frozen=True, eq=False)
class RrmState:
    """Channel and backlog seen at the start of frame ``frame``."""
    frame: int
    channel: ChannelRealization
    queues: np.ndarray
    config: ClusterConfig
    seed: int = 0

    def __post_init__(self):
        queues = np.asarray(self.queues, dtype=float)
        if queues.shape != (self.config.n_ue,) or np.any(queues < 0):
            raise InvalidConfig(f"need {self.config.n_ue} non-negative queues")
        object.__setattr__(self, "queues", queues)


@dataclass(frozen=True)
class RrmAction:
    """Activation set chosen for one frame and what it delivers."""
    active: Tuple[int, ...]
    rates: Tuple[float, ...]
    cost: float
    objective: float


def candidate_sets(n_ru: int) -> List[Tuple[int, ...]]:
    """All 2^N_R activation sets, ordered by bitmask (empty set first)."""
    return [tuple(j for j in range(n_ru) if mask >> j & 1) for mask in range(2 ** n_ru)]


def static_subproblem(state: RrmState, active: Sequence[int],
                      policy: RrmPolicyConfig) -> Tuple[List[float], float]:
    """Per-UE rates and system cost when only ``active`` RUs serve.

    Queue lengths act as rate weights: they fix the SIC decoding or DPC
    encoding order, highest backlog served last. An active RU with a zero
    fronthaul cap draws power but forwards nothing.

    Returns:
        (rates for every UE, cost g)
    """
    cfg = state.config
    if not active:
        return [0.0] * cfg.n_ue, 0.0
    forwarding = [j for j in active if cfg.fronthaul_caps[j] > 0]
    idle_cost = len(active) * (policy.p_static + policy.p_tx_ul) \
        if policy.link is LinkDirection.UPLINK else len(active) * policy.p_static
    if not forwarding:
        return [0.0] * cfg.n_ue, float(idle_cost)
    sub_cfg = cfg.restricted_to_rus(forwarding)
    sub_ch = state.channel.restricted_to_rus(forwarding)
    order = weighted_decoding_order(state.queues)

    if policy.link is LinkDirection.UPLINK:
        decompression = default_decompression_order(sub_cfg, sub_ch)
        q = fit_quantizers(sub_cfg, sub_ch, link=FronthaulLink.UL_WZ, order=decompression)
        rates = ul_rate_sic(sub_cfg, sub_ch, q, order)
        cost = idle_cost
    else:
        plan = zero_forcing_plan(sub_cfg, sub_ch)
        q = fit_quantizers(sub_cfg, sub_ch, link=FronthaulLink.DL_INDEP, plan=plan)
        if policy.precoder is Precoder.DPC:
            rates = dl_rate_dpc(sub_cfg, sub_ch, plan, q, order)
        else:
            rates = dl_rate_linear(sub_cfg, sub_ch, plan, q)
        tx_power = plan.ru_powers(sub_cfg.n_ru, sub_cfg.ru_antennas)
        cost = idle_cost + sum(tx_power)
    return list(rates), float(cost)


def _action(state: RrmState, active: Tuple[int, ...], policy: RrmPolicyConfig) -> RrmAction:
    rates, cost = static_subproblem(state, active, policy)
    objective = -float(np.dot(state.queues, rates)) + policy.v * cost
    return RrmAction(active, tuple(rates), cost, objective)


def exhaustive_activation(state: RrmState, policy: RrmPolicyConfig) -> RrmAction:
    """Best action over every activation set; ties keep the earliest set."""
    best = None
    for active in candidate_sets(state.config.n_ru):
        action = _action(state, active, policy)
        if best is None or action.objective < best.objective:
            best = action
    return best


def greedy_activation(state: RrmState, policy: RrmPolicyConfig) -> RrmAction:
    """Add one RU at a time while the objective keeps dropping."""
    best = _action(state, (), policy)
    while len(best.active) < state.config.n_ru:
        step = None
        for j in range(state.config.n_ru):
            if j in best.active:
                continue
            action = _action(state, tuple(sorted(best.active + (j,))), policy)
            if step is None or action.objective < step.objective:
                step = action
        if step is None or step.objective >= best.objective:
            break
        best = step
    return best


def choose_action(state: RrmState, policy: RrmPolicyConfig) -> RrmAction:
    if state.config.n_ru <= policy.exhaustive_limit:
        return exhaustive_activation(state, policy)
    return greedy_activation(state, policy)


def draw_arrivals(policy: RrmPolicyConfig, seed: int, frame: int) -> np.ndarray:
    """Poisson arrivals in bits for one frame."""
    rng = np.random.default_rng([seed, frame, _ARRIVAL_STREAM])
    return rng.poisson(policy.arrival_means).astype(float)


def lyapunov_step(state: RrmState, policy: RrmPolicyConfig) -> Tuple[RrmAction, RrmState]:
    """Choose this frame's action and advance queues and channel.

    Q_i(t+1) = max(Q_i(t) - r_i * frame_bits, 0) + A_i(t).
    """
    if len(policy.arrival_means) != state.config.n_ue:
        raise InvalidConfig(f"need {state.config.n_ue} arrival means")
    action = choose_action(state, policy)
    served = np.asarray(action.rates) * policy.frame_bits
    queues = np.maximum(state.queues - served, 0.0) + draw_arrivals(policy, state.seed, state.frame)
    channel = generate_channel(state.config, state.seed, policy.channel_mode, state.frame + 1)
    logger.debug(f"Frame {state.frame}: active {list(action.active)}, "
                 f"objective {action.objective:.4f}")
    return action, replace(state, frame=state.frame + 1, channel=channel, queues=queues)


@dataclass
class FrameRecord:
    frame: int
    queues: List[float]
    active: Tuple[int, ...]
    rates: List[float]
    cost: float


@dataclass
class RrmTrace:
    """Per-frame log of a simulation run."""
    n_ue: int
    records: List[FrameRecord] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        return (["frame"] + [f"queue_{i + 1}" for i in range(self.n_ue)] + ["active_set"]
                + [f"rate_{i + 1}" for i in range(self.n_ue)] + ["cost"])

    def rows(self) -> List[Dict[str, Any]]:
        rows = []
        for r in self.records:
            row: Dict[str, Any] = {"frame": r.frame}
            row.update({f"queue_{i + 1}": q for i, q in enumerate(r.queues)})
            row["active_set"] = "|".join(str(j) for j in r.active)
            row.update({f"rate_{i + 1}": x for i, x in enumerate(r.rates)})
            row["cost"] = r.cost
            rows.append(row)
        return rows

    def total_queues(self) -> np.ndarray:
        return np.array([sum(r.queues) for r in self.records])

    def summary(self) -> Dict[str, float]:
        totals = self.total_queues()
        return {
            "frames": len(self.records),
            "time_avg_queue": float(np.mean(totals)) if totals.size else 0.0,
            "time_avg_cost": float(np.mean([r.cost for r in self.records])) if self.records else 0.0,
            "final_total_queue": float(totals[-1]) if totals.size else 0.0,
            "max_total_queue": float(np.max(totals)) if totals.size else 0.0,
            "mean_active_rus": float(np.mean([len(r.active) for r in self.records]))
            if self.records else 0.0,
        }


SUMMARY_FIELDS = ("frames", "time_avg_queue", "time_avg_cost", "final_total_queue",
                  "max_total_queue", "mean_active_rus")


def run(policy: RrmPolicyConfig, cfg: ClusterConfig, seed: int) -> RrmTrace:
    """Simulate ``policy.horizon`` frames with a fresh channel every frame.

    Queue columns of the trace hold the backlog at the start of each frame.
    """
    queues = np.zeros(cfg.n_ue) if policy.initial_queues is None else np.array(policy.initial_queues)
    state = RrmState(0, generate_channel(cfg, seed, policy.channel_mode, 0), queues, cfg, seed)
    trace = RrmTrace(cfg.n_ue)
    for _ in range(policy.horizon):
        action, next_state = lyapunov_step(state, policy)
        trace.records.append(FrameRecord(state.frame, state.queues.tolist(), action.active,
                                         list(action.rates), action.cost))
        state = next_state
    summary = trace.summary()
    logger.info(f"RRM run seed={seed} V={policy.v}: avg queue {summary['time_avg_queue']:.3f}, "
                f"avg cost {summary['time_avg_cost']:.3f}")
    return trace
