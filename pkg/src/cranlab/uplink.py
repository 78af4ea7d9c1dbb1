"""Uplink achievable rates and fronthaul requirements.

Rates are log-det expressions of the received covariance after
decompression; no explicit beamformer is formed.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import FEASIBILITY_TOL, Receiver, UplinkCompression
from .errors import CrossBlocksNotZero, SingularMatrix, SingularQuantizer
from .matrix_core import (
    HermitianPsd,
    block_submatrix,
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
    received_cov_ul,
    ul_signal_cov,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UplinkStrategy:
    """Receiver and compression choice; ``None`` orders mean the defaults."""
    receiver: Receiver = Receiver.LINEAR
    compression: UplinkCompression = UplinkCompression.INDEPENDENT
    decoding_order: Optional[Tuple[int, ...]] = None
    decompression_order: Optional[Tuple[int, ...]] = None

    @property
    def label(self) -> str:
        return f"{self.receiver.value}/{self.compression.value}"


@dataclass
class RateReport:
    """Per-UE rates and per-RU fronthaul requirements, both in bits/s/Hz."""
    per_ue_rates: List[float]
    per_ru_fronthaul: List[float]
    feasible: bool
    orders: Dict[str, List[int]] = field(default_factory=dict)

    @classmethod
    def build(cls, rates: Sequence[float], fronthaul: Sequence[float],
              caps: Sequence[float], **orders: Sequence[int]) -> "RateReport":
        """Assemble a report and evaluate feasibility against ``caps``."""
        feasible = all(c <= cap + FEASIBILITY_TOL for c, cap in zip(fronthaul, caps))
        return cls(
            per_ue_rates=[float(r) for r in rates],
            per_ru_fronthaul=[float(c) for c in fronthaul],
            feasible=feasible,
            orders={k: list(v) for k, v in orders.items()},
        )

    @property
    def sum_rate(self) -> float:
        return float(sum(self.per_ue_rates))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_ue_rates": self.per_ue_rates,
            "per_ru_fronthaul": self.per_ru_fronthaul,
            "feasible": self.feasible,
            "sum_rate": self.sum_rate,
            **self.orders,
        }


def _require_per_ru(cfg: ClusterConfig, q: QuantizationConfig) -> None:
    check_quantization(cfg, q)
    if not q.is_block_diagonal():
        raise CrossBlocksNotZero("uplink quantization is per-RU; cross blocks must be zero")


def _interference_cov(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig,
                      ues: Sequence[int]) -> HermitianPsd:
    """Covariance of the decompressed signal from the given UEs plus all noise."""
    cov = ul_signal_cov(cfg, ch, ues) + cfg.noise_var_ul * np.eye(cfg.ru_dim) + q.cov
    return symmetrize(cov)


def _rate(numerator: HermitianPsd, denominator: HermitianPsd) -> float:
    return max(logdet2(numerator) - logdet2(denominator), 0.0)


def ul_rate_linear(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig) -> List[float]:
    """Linear MMSE receiver rates, interference from every other UE treated as noise.

    Args:
        cfg: Cluster configuration
        ch: Channel realization
        q: Block-diagonal quantization configuration

    Returns:
        R_i for every UE, bits/s/Hz
    """
    _require_per_ru(cfg, q)
    everyone = list(range(cfg.n_ue))
    total = _interference_cov(cfg, ch, q, everyone)
    rates = []
    for i in everyone:
        others = [k for k in everyone if k != i]
        rates.append(_rate(total, _interference_cov(cfg, ch, q, others)))
    return rates


def ul_rate_sic(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig,
                order: Sequence[int]) -> List[float]:
    """Successive interference cancellation rates.

    The UE at position k only sees interference from UEs after it in ``order``.
    Rates are returned indexed by UE, not by position.
    """
    _require_per_ru(cfg, q)
    order = check_order(order, cfg.n_ue, "decoding order")
    rates = [0.0] * cfg.n_ue
    for pos, i in enumerate(order):
        remaining = list(order[pos:])
        later = list(order[pos + 1:])
        rates[i] = _rate(_interference_cov(cfg, ch, q, remaining),
                         _interference_cov(cfg, ch, q, later))
    return rates


def _require_quantizer_pd(q: QuantizationConfig, j: int) -> HermitianPsd:
    q_jj = q.diag_block(j)
    require_pd(q_jj, SingularQuantizer, f"quantizer of RU {j}")
    return q_jj


def ul_fronthaul_indep(cfg: ClusterConfig, ch: ChannelRealization,
                       q: QuantizationConfig) -> List[float]:
    """Per-RU fronthaul for independent point-to-point compression.

    C_j = log2|R_jj + Q_j| - log2|Q_j|.
    """
    _require_per_ru(cfg, q)
    noisy = received_cov_ul(cfg, ch) + q.cov
    costs = []
    for j in range(cfg.n_ru):
        q_jj = _require_quantizer_pd(q, j)
        s = cfg.ru_index_set([j])
        costs.append(max(logdet2(block_submatrix(noisy, s, s)) - logdet2(q_jj), 0.0))
    return costs


def ul_fronthaul_wyner_ziv(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig,
                           order: Sequence[int]) -> List[float]:
    """Per-RU fronthaul for Wyner-Ziv compression with sequential decompression.

    RU j is decompressed with the already recovered signals of the RUs ahead of
    it in ``order`` as side information:

        C_j = log2|R_JJ + Q_JJ| - log2|R_PP + Q_PP| - log2|Q_j|

    where P are the RUs before j and J = P + [j]. Costs are indexed by RU.
    """
    _require_per_ru(cfg, q)
    order = check_order(order, cfg.n_ru, "decompression order")
    noisy = received_cov_ul(cfg, ch) + q.cov
    costs = [0.0] * cfg.n_ru
    previous_logdet = 0.0
    for pos, j in enumerate(order):
        q_jj = _require_quantizer_pd(q, j)
        s = cfg.ru_index_set(order[:pos + 1])
        joint_logdet = logdet2(block_submatrix(noisy, s, s))
        costs[j] = max(joint_logdet - previous_logdet - logdet2(q_jj), 0.0)
        previous_logdet = joint_logdet
    return costs


def ul_wz_conditional_cov(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig,
                          ru: int, previous: Sequence[int]) -> HermitianPsd:
    """Covariance of y_ru given the decompressed signals of ``previous`` RUs.

    Only the quantizers of ``previous`` enter; the quantizer of ``ru`` itself
    may still be unset.
    """
    check_quantization(cfg, q)
    received = received_cov_ul(cfg, ch)
    side = cfg.ru_index_set(previous)
    if previous:
        received = received.copy()
        idx = side.flat()
        received[np.ix_(idx, idx)] += q.submatrix(previous)
    try:
        return schur_conditional_cov(received, cfg.ru_index_set([ru]), side)
    except SingularMatrix:
        logger.warning(f"Side information of RU {ru} from RUs {list(previous)} is singular")
        raise


def default_decoding_order(cfg: ClusterConfig, ch: ChannelRealization) -> List[int]:
    """UEs by descending received signal trace (strongest decoded first)."""
    strength = [float(np.real(np.trace(ul_signal_cov(cfg, ch, [i])))) for i in range(cfg.n_ue)]
    return sorted(range(cfg.n_ue), key=lambda i: -strength[i])


def default_decompression_order(cfg: ClusterConfig, ch: ChannelRealization) -> List[int]:
    """RUs by descending received covariance trace."""
    received = received_cov_ul(cfg, ch)
    strength = []
    for j in range(cfg.n_ru):
        s = cfg.ru_index_set([j])
        strength.append(float(np.real(np.trace(block_submatrix(received, s, s)))))
    return sorted(range(cfg.n_ru), key=lambda j: -strength[j])


def weighted_decoding_order(weights: Sequence[float]) -> List[int]:
    """Decoding order maximizing sum_i w_i R_i under SIC.

    Lowest weight is decoded first so that the highest-weight UE sees no
    interference. Ties keep index order.
    """
    return sorted(range(len(weights)), key=lambda i: weights[i])


def evaluate_uplink(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig,
                    strategy: UplinkStrategy = UplinkStrategy()) -> RateReport:
    """Rates and fronthaul for one strategy combination.

    Args:
        cfg: Cluster configuration, caps used for feasibility
        ch: Channel realization
        q: Block-diagonal quantization configuration
        strategy: Receiver, compression and optional orders

    Returns:
        RateReport
    """
    if strategy.receiver is Receiver.SIC:
        decoding = list(strategy.decoding_order or default_decoding_order(cfg, ch))
        rates = ul_rate_sic(cfg, ch, q, decoding)
    else:
        decoding = []
        rates = ul_rate_linear(cfg, ch, q)

    if strategy.compression is UplinkCompression.WYNER_ZIV:
        decompression = list(strategy.decompression_order or default_decompression_order(cfg, ch))
        fronthaul = ul_fronthaul_wyner_ziv(cfg, ch, q, decompression)
    else:
        decompression = []
        fronthaul = ul_fronthaul_indep(cfg, ch, q)

    report = RateReport.build(rates, fronthaul, cfg.fronthaul_caps,
                              decoding_order=decoding, decompression_order=decompression)
    logger.debug(f"Uplink {strategy.label}: sum rate {report.sum_rate:.4f}, "
                 f"feasible={report.feasible}")
    return report
