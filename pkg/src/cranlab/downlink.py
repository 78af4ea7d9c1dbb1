"""Downlink achievable rates and fronthaul requirements."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .constants import DownlinkCompression, Precoder
from .errors import (
    CrossBlocksNotZero,
    DimensionMismatch,
    InvalidConfig,
    PowerBudgetExceeded,
    SingularQuantizer,
)
from .matrix_core import (
    ComplexMatrix,
    HermitianPsd,
    block_submatrix,
    hermitian_psd,
    logdet2,
    require_pd,
    schur_conditional_cov,
    symmetrize,
)
from .scenario import (
    ChannelRealization,
    ClusterConfig,
    QuantizationConfig,
    check_order,
    check_quantization,
)
from .uplink import RateReport

logger = logging.getLogger(__name__)

# Relative slack on the per-RU power check
_POWER_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class DlSignalPlan:
    """Per-UE transmit covariances over all RU antennas.

    The eigenvectors of each covariance are the transmit beamformers of that
    UE's signal across the RUs.
    """
    per_ue_tx_cov: Tuple[HermitianPsd, ...]
    precoding_order: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        covs = tuple(hermitian_psd(c) for c in self.per_ue_tx_cov)
        if not covs:
            raise InvalidConfig("a downlink plan needs at least one UE")
        dims = {c.shape[0] for c in covs}
        if len(dims) != 1:
            raise DimensionMismatch(f"per-UE covariances have different sizes: {sorted(dims)}")
        object.__setattr__(self, "per_ue_tx_cov", covs)
        if self.precoding_order is not None:
            object.__setattr__(self, "precoding_order",
                               check_order(self.precoding_order, len(covs), "precoding order"))

    @property
    def n_ue(self) -> int:
        return len(self.per_ue_tx_cov)

    @property
    def dim(self) -> int:
        return self.per_ue_tx_cov[0].shape[0]

    def total_cov(self, ues: Optional[Sequence[int]] = None) -> HermitianPsd:
        """Sum of the transmit covariances of ``ues`` (all UEs by default)."""
        ues = range(self.n_ue) if ues is None else ues
        total = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for i in ues:
            total += self.per_ue_tx_cov[i]
        return symmetrize(total)

    def ru_powers(self, n_ru: int, ru_antennas: int) -> List[float]:
        """Trace of every diagonal RU block of the total covariance."""
        total = self.total_cov()
        powers = []
        for j in range(n_ru):
            block = total[j * ru_antennas:(j + 1) * ru_antennas, j * ru_antennas:(j + 1) * ru_antennas]
            powers.append(float(np.real(np.trace(block))))
        return powers

    def check_power(self, cfg: ClusterConfig) -> None:
        """Raise PowerBudgetExceeded if any RU exceeds M_R times its per-antenna budget."""
        if self.dim != cfg.ru_dim:
            raise DimensionMismatch(f"plan dimension {self.dim} does not match {cfg.ru_dim} RU antennas")
        budget = cfg.ru_antennas * cfg.ru_power_per_antenna
        for j, p in enumerate(self.ru_powers(cfg.n_ru, cfg.ru_antennas)):
            if p > budget * (1.0 + _POWER_RTOL):
                raise PowerBudgetExceeded(f"RU {j} transmits {p:.6g}, budget {budget:.6g}")

    def scaled(self, factors: Sequence[float]) -> "DlSignalPlan":
        """Plan with UE i's covariance multiplied by ``factors[i]``."""
        return DlSignalPlan(tuple(f * c for f, c in zip(factors, self.per_ue_tx_cov)),
                            self.precoding_order)


@dataclass(frozen=True)
class DownlinkStrategy:
    """Precoder and compression choice; ``None`` orders mean the defaults.

    ``q_per_ue_term`` adds the quantization covariance once per UE term inside
    the rate sums instead of once overall.
    """
    precoder: Precoder = Precoder.LINEAR
    compression: DownlinkCompression = DownlinkCompression.INDEPENDENT
    precoding_order: Optional[Tuple[int, ...]] = None
    encoding_order: Optional[Tuple[int, ...]] = None
    q_per_ue_term: bool = False

    @property
    def label(self) -> str:
        return f"{self.precoder.value}/{self.compression.value}"


def _check_dims(cfg: ClusterConfig, ch: ChannelRealization, plan: DlSignalPlan,
                q: QuantizationConfig) -> None:
    check_quantization(cfg, q)
    if plan.n_ue != cfg.n_ue or plan.dim != cfg.ru_dim:
        raise DimensionMismatch(
            f"plan ({plan.n_ue} UEs, dim {plan.dim}) does not match cluster "
            f"({cfg.n_ue} UEs, dim {cfg.ru_dim})")
    if ch.h_dl.shape != (cfg.ue_dim, cfg.ru_dim):
        raise DimensionMismatch(f"downlink channel {ch.h_dl.shape} does not match cluster")


def _received_cov(cfg: ClusterConfig, h_i: ComplexMatrix, plan: DlSignalPlan,
                  q: QuantizationConfig, ues: Sequence[int], q_per_ue_term: bool) -> HermitianPsd:
    """H_i (sum of S_k over ``ues`` + Q) H_i^H + sigma^2 I at one UE."""
    if q_per_ue_term:
        transmitted = plan.total_cov(ues) + len(ues) * q.cov
    else:
        transmitted = plan.total_cov(ues) + q.cov
    cov = h_i @ transmitted @ h_i.conj().T + cfg.noise_var_dl * np.eye(h_i.shape[0])
    return symmetrize(cov)


def _rate(numerator: HermitianPsd, denominator: HermitianPsd) -> float:
    return max(logdet2(numerator) - logdet2(denominator), 0.0)


def dl_rate_linear(cfg: ClusterConfig, ch: ChannelRealization, plan: DlSignalPlan,
                   q: QuantizationConfig, q_per_ue_term: bool = False) -> List[float]:
    """Linear beamforming rates, multiuser interference treated as noise.

    Args:
        cfg: Cluster configuration
        ch: Channel realization
        plan: Per-UE transmit covariances
        q: Quantization covariance, cross blocks allowed
        q_per_ue_term: Add Q inside every per-UE term

    Returns:
        R_i for every UE, bits/s/Hz
    """
    _check_dims(cfg, ch, plan, q)
    everyone = list(range(cfg.n_ue))
    rates = []
    for i in everyone:
        h_i = ch.dl_row(i)
        others = [k for k in everyone if k != i]
        rates.append(_rate(_received_cov(cfg, h_i, plan, q, everyone, q_per_ue_term),
                           _received_cov(cfg, h_i, plan, q, others, q_per_ue_term)))
    return rates


def dl_rate_dpc(cfg: ClusterConfig, ch: ChannelRealization, plan: DlSignalPlan,
                q: QuantizationConfig, order: Sequence[int],
                q_per_ue_term: bool = False) -> List[float]:
    """Dirty-paper coding rates.

    Interference of UEs earlier in ``order`` is pre-subtracted, so the UE at
    position k only sees the UEs after it. The first UE in the order gets its
    linear-beamforming rate. Rates are indexed by UE.
    """
    _check_dims(cfg, ch, plan, q)
    order = check_order(order, cfg.n_ue, "precoding order")
    rates = [0.0] * cfg.n_ue
    for pos, i in enumerate(order):
        h_i = ch.dl_row(i)
        rates[i] = _rate(_received_cov(cfg, h_i, plan, q, list(order[pos:]), q_per_ue_term),
                         _received_cov(cfg, h_i, plan, q, list(order[pos + 1:]), q_per_ue_term))
    return rates


def _signal_block(plan: DlSignalPlan, q: QuantizationConfig, j: int) -> HermitianPsd:
    """S_jj, RU j's block of the total transmit covariance."""
    if plan.dim != q.cov.shape[0]:
        raise DimensionMismatch(f"plan dimension {plan.dim} does not match quantizer {q.cov.shape[0]}")
    s = q.index_set([j])
    return block_submatrix(plan.total_cov(), s, s)


def _quantizer_block(q: QuantizationConfig, j: int) -> HermitianPsd:
    q_jj = q.diag_block(j)
    require_pd(q_jj, SingularQuantizer, f"quantizer of RU {j}")
    return q_jj


def dl_fronthaul_indep(plan: DlSignalPlan, q: QuantizationConfig) -> List[float]:
    """Per-RU fronthaul for independent compression.

    C_j = log2|S_jj + Q_jj| - log2|Q_jj|; ``q`` must be block diagonal.
    """
    if not q.is_block_diagonal():
        raise CrossBlocksNotZero("independent compression needs a block-diagonal quantizer")
    costs = []
    for j in range(q.n_ru):
        q_jj = _quantizer_block(q, j)
        costs.append(max(logdet2(_signal_block(plan, q, j) + q_jj) - logdet2(q_jj), 0.0))
    return costs


def dl_fronthaul_multivariate(plan: DlSignalPlan, q: QuantizationConfig,
                              order: Sequence[int]) -> List[float]:
    """Per-RU fronthaul for multivariate compression.

    RUs are encoded in ``order``; RU j pays its independent cost plus
    log2|Q_jj| - log2|Q_jj given Q of the RUs encoded before it|, the price of
    the correlation it carries. Costs are indexed by RU.
    """
    order = check_order(order, q.n_ru, "encoding order")
    costs = [0.0] * q.n_ru
    for pos, j in enumerate(order):
        q_jj = _quantizer_block(q, j)
        indep = logdet2(_signal_block(plan, q, j) + q_jj) - logdet2(q_jj)
        conditional = schur_conditional_cov(q.cov, q.index_set([j]), q.index_set(order[:pos]))
        require_pd(conditional, SingularQuantizer, f"conditional quantizer of RU {j}")
        surcharge = max(logdet2(q_jj) - logdet2(conditional), 0.0)
        costs[j] = max(indep, 0.0) + surcharge
    return costs


def default_precoding_order(cfg: ClusterConfig, ch: ChannelRealization) -> List[int]:
    """UEs by descending downlink channel energy."""
    strength = [float(np.linalg.norm(ch.dl_row(i)) ** 2) for i in range(cfg.n_ue)]
    return sorted(range(cfg.n_ue), key=lambda i: -strength[i])


def zero_forcing_plan(cfg: ClusterConfig, ch: ChannelRealization,
                      power_per_antenna: Optional[float] = None,
                      ue_weights: Optional[Sequence[float]] = None) -> DlSignalPlan:
    """Zero-forcing beamformers from the pseudo-inverse of the aggregate channel.

    Column block i of pinv(H_dl), scaled by ``ue_weights[i]``, forms UE i's
    covariance; a common factor then brings the most loaded RU to exactly
    M_R * power_per_antenna.

    Args:
        cfg: Cluster configuration
        ch: Channel realization
        power_per_antenna: Per-antenna budget, defaults to the cluster's
        ue_weights: Relative per-UE power, all ones by default

    Returns:
        DlSignalPlan
    """
    budget = cfg.ru_antennas * (power_per_antenna if power_per_antenna is not None
                                else cfg.ru_power_per_antenna)
    weights = np.ones(cfg.n_ue) if ue_weights is None else np.asarray(ue_weights, dtype=float)
    if weights.shape != (cfg.n_ue,) or np.any(weights < 0) or not np.any(weights > 0):
        raise InvalidConfig(f"UE weights must be {cfg.n_ue} non-negative values, not all zero")

    w = np.linalg.pinv(ch.h_dl)
    c = cfg.ue_antennas
    covs = []
    for i in range(cfg.n_ue):
        w_i = w[:, i * c:(i + 1) * c]
        covs.append(weights[i] * (w_i @ w_i.conj().T))
    plan = DlSignalPlan(tuple(covs))
    peak = max(plan.ru_powers(cfg.n_ru, cfg.ru_antennas))
    if peak <= 0:
        raise InvalidConfig("zero-forcing plan has no power on any RU")
    return plan.scaled([budget / peak] * cfg.n_ue)


def evaluate_downlink(cfg: ClusterConfig, ch: ChannelRealization, plan: DlSignalPlan,
                      q: QuantizationConfig,
                      strategy: DownlinkStrategy = DownlinkStrategy()) -> RateReport:
    """Rates and fronthaul for one strategy combination.

    The plan's per-RU power is checked against the cluster budget first.
    """
    plan.check_power(cfg)
    if strategy.precoder is Precoder.DPC:
        precoding = list(strategy.precoding_order or plan.precoding_order
                         or default_precoding_order(cfg, ch))
        rates = dl_rate_dpc(cfg, ch, plan, q, precoding, strategy.q_per_ue_term)
    else:
        precoding = []
        rates = dl_rate_linear(cfg, ch, plan, q, strategy.q_per_ue_term)

    if strategy.compression is DownlinkCompression.MULTIVARIATE:
        encoding = list(strategy.encoding_order or range(cfg.n_ru))
        fronthaul = dl_fronthaul_multivariate(plan, q, encoding)
    else:
        encoding = []
        fronthaul = dl_fronthaul_indep(plan, q)

    report = RateReport.build(rates, fronthaul, cfg.fronthaul_caps,
                              precoding_order=precoding, encoding_order=encoding)
    logger.debug(f"Downlink {strategy.label}: sum rate {report.sum_rate:.4f}, "
                 f"feasible={report.feasible}")
    return report
