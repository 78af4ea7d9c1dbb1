"""Heuristic joint design of downlink beamforming and compression.

Both searches here are local: they return the best point they visit, with no
optimality guarantee.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from .constants import DownlinkCompression, FronthaulLink, Precoder
from .downlink import (
    DlSignalPlan,
    DownlinkStrategy,
    default_precoding_order,
    dl_fronthaul_multivariate,
    dl_rate_dpc,
    dl_rate_linear,
    evaluate_downlink,
    zero_forcing_plan,
)
from .errors import CapTooSmall, InvalidConfig
from .matrix_core import symmetrize
from .quantizer import fit_quantizers
from .scenario import ChannelRealization, ClusterConfig, QuantizationConfig, check_order
from .uplink import RateReport

logger = logging.getLogger(__name__)

# Share of the quantization noise steered into the channel null space
DEFAULT_NULL_MIX = (0.0, 0.25, 0.5, 0.7, 0.85, 0.95)
# Per-UE power multipliers tried by the coordinate search
DEFAULT_POWER_FACTORS = (0.5, 0.8, 1.25, 2.0)

_SCALE_LO = 1e-12
_SCALE_HI = 1e12


@dataclass
class MultivariateDesign:
    """Correlated quantizer chosen for a fixed plan."""
    q: QuantizationConfig
    null_mix: float
    sum_rate: float
    per_ru_fronthaul: List[float]


def _sum_rate(cfg: ClusterConfig, ch: ChannelRealization, plan: DlSignalPlan,
              q: QuantizationConfig, precoder: Precoder, weights: Sequence[float]) -> float:
    if precoder is Precoder.DPC:
        order = plan.precoding_order or default_precoding_order(cfg, ch)
        rates = dl_rate_dpc(cfg, ch, plan, q, order)
    else:
        rates = dl_rate_linear(cfg, ch, plan, q)
    return float(np.dot(weights, rates))


def _null_projector(ch: ChannelRealization) -> Optional[np.ndarray]:
    basis = scipy.linalg.null_space(ch.h_dl)
    if basis.shape[1] == 0:
        return None
    return basis @ basis.conj().T


def _shape(base: np.ndarray, projector: Optional[np.ndarray], mix: float) -> np.ndarray:
    """D^1/2 ((1-mix) I + mix * n/rank * P) D^1/2 for the per-RU base levels D."""
    dim = base.shape[0]
    if projector is None or mix == 0.0:
        core = np.eye(dim, dtype=np.complex128)
    else:
        rank = max(float(np.real(np.trace(projector))), 1.0)
        core = (1.0 - mix) * np.eye(dim) + mix * (dim / rank) * projector
    root = np.sqrt(base)
    return symmetrize(root[:, None] * core * root[None, :])


def _fit_scale(shape: np.ndarray, cfg: ClusterConfig, plan: DlSignalPlan,
               caps: Sequence[float], order: Sequence[int]) -> Optional[float]:
    """Smallest scale s with every multivariate cost of s * shape within its cap."""

    def excess(s: float) -> float:
        q = QuantizationConfig(s * shape, cfg.n_ru, cfg.ru_antennas)
        costs = dl_fronthaul_multivariate(plan, q, order)
        return max(c - cap for c, cap in zip(costs, caps))

    lo, hi = _SCALE_LO, _SCALE_HI
    if excess(hi) > 0:
        return None
    if excess(lo) <= 0:
        return lo
    while hi / lo > 1.0 + 1e-12:
        mid = math.sqrt(lo * hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi


def design_multivariate_q(cfg: ClusterConfig, ch: ChannelRealization, plan: DlSignalPlan,
                          caps: Optional[Sequence[float]] = None,
                          encoding_order: Optional[Sequence[int]] = None,
                          precoder: Precoder = Precoder.LINEAR,
                          null_mix: Sequence[float] = DEFAULT_NULL_MIX) -> MultivariateDesign:
    """Correlated quantizer that steers noise toward the downlink null space.

    Starts from the independent per-RU fit and mixes in a share of noise lying
    in the null space of the aggregate channel, where it never reaches a UE.
    For every mix a common scale is fitted so that all multivariate fronthaul
    costs meet their caps; the mix with the highest sum rate wins. Mix 0 is the
    independent fit itself, so the result is never worse.

    Args:
        cfg: Cluster configuration
        ch: Channel realization
        plan: Fixed signal plan
        caps: Per-RU caps, the cluster's by default
        encoding_order: Multivariate encoding order, natural by default
        precoder: Rate model used to rank the candidates
        null_mix: Candidate null-space shares in [0, 1)

    Returns:
        MultivariateDesign
    """
    caps = list(cfg.fronthaul_caps if caps is None else caps)
    order = check_order(range(cfg.n_ru) if encoding_order is None else encoding_order,
                        cfg.n_ru, "encoding order")
    if any(not 0.0 <= m < 1.0 for m in null_mix):
        raise InvalidConfig(f"null-space mix must lie in [0, 1): {list(null_mix)}")
    weights = np.ones(cfg.n_ue)

    indep = fit_quantizers(cfg, ch, caps, FronthaulLink.DL_INDEP, plan=plan)
    best = MultivariateDesign(
        q=indep,
        null_mix=0.0,
        sum_rate=_sum_rate(cfg, ch, plan, indep, precoder, weights),
        per_ru_fronthaul=dl_fronthaul_multivariate(plan, indep, order),
    )
    projector = _null_projector(ch)
    if projector is None:
        logger.debug("Downlink channel has no null space; keeping the independent fit")
        return best

    base = np.real(np.diag(indep.cov))
    for mix in null_mix:
        if mix == 0.0:
            continue
        shape = _shape(base, projector, mix)
        scale = _fit_scale(shape, cfg, plan, caps, order)
        if scale is None:
            logger.debug(f"Null mix {mix}: surcharge alone exceeds a cap")
            continue
        q = QuantizationConfig(scale * shape, cfg.n_ru, cfg.ru_antennas)
        rate = _sum_rate(cfg, ch, plan, q, precoder, weights)
        logger.debug(f"Null mix {mix}: scale {scale:.4g}, sum rate {rate:.4f}")
        if rate > best.sum_rate:
            best = MultivariateDesign(q, mix, rate, dl_fronthaul_multivariate(plan, q, order))
    return best


@dataclass
class DownlinkDesign:
    """Result of the coordinate search over per-UE power weights."""
    plan: DlSignalPlan
    q: QuantizationConfig
    ue_power_weights: List[float]
    objective: float
    report: RateReport
    history: List[float] = field(default_factory=list)


def _evaluate(cfg: ClusterConfig, ch: ChannelRealization, ue_power: Sequence[float],
              caps: Sequence[float], weights: Sequence[float],
              strategy: DownlinkStrategy):
    plan = zero_forcing_plan(cfg, ch, ue_weights=ue_power)
    if strategy.compression is DownlinkCompression.MULTIVARIATE:
        q = design_multivariate_q(cfg, ch, plan, caps, strategy.encoding_order,
                                  strategy.precoder).q
    else:
        q = fit_quantizers(cfg, ch, caps, FronthaulLink.DL_INDEP, plan=plan)
    report = evaluate_downlink(cfg.with_caps(caps), ch, plan, q, strategy)
    return plan, q, report, float(np.dot(weights, report.per_ue_rates))


def optimize_downlink(cfg: ClusterConfig, ch: ChannelRealization,
                      caps: Optional[Sequence[float]] = None,
                      weights: Optional[Sequence[float]] = None,
                      strategy: DownlinkStrategy = DownlinkStrategy(),
                      factors: Sequence[float] = DEFAULT_POWER_FACTORS,
                      max_rounds: int = 10) -> DownlinkDesign:
    """Weighted sum-rate coordinate search over zero-forcing power weights.

    Each step scales one UE's power weight, rebuilds the zero-forcing plan at
    the per-RU budget and refits the quantizers to the caps. Only improving
    steps are kept, so ``history`` never decreases. This is a local heuristic.
    """
    caps = list(cfg.fronthaul_caps if caps is None else caps)
    weights = np.ones(cfg.n_ue) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != (cfg.n_ue,) or np.any(weights < 0):
        raise InvalidConfig(f"need {cfg.n_ue} non-negative rate weights")

    power = [1.0] * cfg.n_ue
    plan, q, report, objective = _evaluate(cfg, ch, power, caps, weights, strategy)
    history = [objective]
    for round_no in range(max_rounds):
        improved = False
        for i in range(cfg.n_ue):
            for factor in factors:
                trial = list(power)
                trial[i] *= factor
                try:
                    result = _evaluate(cfg, ch, trial, caps, weights, strategy)
                except CapTooSmall:
                    continue
                if result[3] > objective + 1e-12:
                    power = trial
                    plan, q, report, objective = result
                    improved = True
        history.append(objective)
        logger.debug(f"Round {round_no + 1}: weighted sum rate {objective:.4f}")
        if not improved:
            break

    logger.info(f"Downlink search finished at {objective:.4f} after {len(history) - 1} rounds")
    return DownlinkDesign(plan, q, power, objective, report, history)
