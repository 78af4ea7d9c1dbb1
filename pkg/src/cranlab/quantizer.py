"""Quantization-noise sizing against fronthaul caps and the scalar uniform quantizer model."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import numpy.typing as npt

from .constants import (
    ALPHA_HI_FACTOR,
    ALPHA_LO_FACTOR,
    BISECTION_MAX_ITER,
    BISECTION_TARGET,
    BISECTION_TOL,
    FronthaulLink,
)
from .downlink import DlSignalPlan
from .errors import CapTooSmall, InvalidConfig, InvalidRange, NonMonotone
from .matrix_core import HermitianPsd, block_submatrix
from .scenario import ChannelRealization, ClusterConfig, QuantizationConfig, check_order, received_cov_ul
from .uplink import ul_rate_sic, ul_wz_conditional_cov

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UniformQuantizerModel:
    """Scalar uniform quantizer applied to I and Q.

    ``full_scale`` is the largest amplitude M; ``step`` is the quantization
    step. A zero step is allowed to describe the unquantized limit.
    """
    full_scale: float
    step: float

    def __post_init__(self):
        if not (math.isfinite(self.full_scale) and self.full_scale > 0):
            raise InvalidRange(f"full scale must be > 0, got {self.full_scale}")
        if not (math.isfinite(self.step) and 0 <= self.step <= self.full_scale):
            raise InvalidRange(f"step must be in [0, {self.full_scale}], got {self.step}")

    @classmethod
    def from_component_bits(cls, bits: float, full_scale: float = 1.0) -> "UniformQuantizerModel":
        return cls(full_scale, component_bits_to_step(bits, full_scale))

    @property
    def rate(self) -> float:
        """Bits per complex sample."""
        return uniform_rate(self)


def uniform_rate(model: UniformQuantizerModel) -> float:
    """Bits per complex sample, 2 log2(M / step)."""
    if model.step <= 0:
        raise InvalidRange("rate is unbounded for a zero step")
    return 2.0 * math.log2(model.full_scale / model.step)


def uniform_noise_cov(model: UniformQuantizerModel, dim: int) -> HermitianPsd:
    """Gaussian-equivalent noise covariance, step^2/12 per real component."""
    return (model.step ** 2 / 6.0) * np.eye(dim, dtype=np.complex128)


def component_bits_to_step(bits: float, full_scale: float = 1.0) -> float:
    """Step of a b-bit-per-component quantizer spanning [-M, M]."""
    if bits < 1:
        raise InvalidRange(f"need at least 1 bit per component, got {bits}")
    return full_scale * 2.0 ** (1.0 - bits)


def step_to_component_bits(step: float, full_scale: float = 1.0) -> float:
    """Inverse of :func:`component_bits_to_step`."""
    if not 0 < step <= 2 * full_scale:
        raise InvalidRange(f"step must be in (0, 2M], got {step}")
    return 1.0 + math.log2(full_scale / step)


def uniform_quantize(x: npt.ArrayLike, step: float) -> np.ndarray:
    """Mid-tread uniform quantization of the real and imaginary parts."""
    x = np.asarray(x)
    if step < 0:
        raise InvalidRange(f"step must be >= 0, got {step}")
    if step == 0:
        return x.copy()
    if np.iscomplexobj(x):
        return step * (np.round(x.real / step) + 1j * np.round(x.imag / step))
    return step * np.round(x / step)


def isotropic_cost(eigenvalues: np.ndarray, alpha: float) -> float:
    """log2|C + alpha I| - log2|alpha I| from the eigenvalues of C."""
    return float(np.sum(np.log2(1.0 + eigenvalues / alpha)))


def bisect_isotropic_level(eigenvalues: npt.ArrayLike, cap: float) -> float:
    """Smallest isotropic level alpha whose cost stays within ``cap``.

    Bisection runs in log(alpha) over [1e-30, 1e9] times the trace. An
    infinite cap returns the lower bracket.

    Args:
        eigenvalues: Eigenvalues of the covariance being compressed
        cap: Fronthaul cap in bits/s/Hz

    Returns:
        alpha with |cost(alpha) - cap| <= 1e-6, or the lower bracket when
        even that costs less than the cap
    """
    eigs = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    if math.isnan(cap) or cap <= 0:
        raise CapTooSmall(f"fronthaul cap must be > 0, got {cap}")
    scale = float(np.sum(eigs))
    if scale <= 0:
        scale = 1.0
    lo, hi = ALPHA_LO_FACTOR * scale, ALPHA_HI_FACTOR * scale
    if math.isinf(cap):
        return lo
    cost_lo, cost_hi = isotropic_cost(eigs, lo), isotropic_cost(eigs, hi)
    if cost_hi > cap + BISECTION_TOL:
        raise CapTooSmall(f"cap {cap:.3g} below cost {cost_hi:.3g} at the coarsest level")
    if cost_lo <= cap:
        return lo

    for iteration in range(BISECTION_MAX_ITER):
        mid = math.sqrt(lo * hi)
        cost_mid = isotropic_cost(eigs, mid)
        if not cost_hi - BISECTION_TARGET <= cost_mid <= cost_lo + BISECTION_TARGET:
            raise NonMonotone(f"cost {cost_mid:.6g} at alpha={mid:.3e} outside "
                              f"[{cost_hi:.6g}, {cost_lo:.6g}]")
        if cost_mid > cap:
            lo, cost_lo = mid, cost_mid
        else:
            hi, cost_hi = mid, cost_mid
        if cap - cost_hi <= BISECTION_TARGET:
            logger.debug(f"Bisection converged after {iteration + 1} steps: alpha={hi:.6e}")
            break

    if cap - cost_hi > BISECTION_TOL:
        raise NonMonotone(f"bisection stalled with residual {cap - cost_hi:.3e} bits")
    return hi


def compressed_cov(cfg: ClusterConfig, ch: ChannelRealization, link: FronthaulLink, ru: int,
                   q: Optional[QuantizationConfig] = None, previous: Sequence[int] = (),
                   plan: Optional[DlSignalPlan] = None) -> HermitianPsd:
    """Covariance RU ``ru`` compresses under the given fronthaul model."""
    if link is FronthaulLink.UL_INDEP:
        s = cfg.ru_index_set([ru])
        return block_submatrix(received_cov_ul(cfg, ch), s, s)
    if link is FronthaulLink.UL_WZ:
        if q is None:
            q = QuantizationConfig.isotropic([1.0] * cfg.n_ru, cfg.ru_antennas)
        return ul_wz_conditional_cov(cfg, ch, q, ru, previous)
    if plan is None:
        raise InvalidConfig("downlink fitting needs a signal plan")
    s = cfg.ru_index_set([ru])
    return block_submatrix(plan.total_cov(), s, s)


def fit_q_to_cap(cfg: ClusterConfig, ch: ChannelRealization, cap: float,
                 link: FronthaulLink = FronthaulLink.UL_INDEP, ru: int = 0,
                 q: Optional[QuantizationConfig] = None, previous: Sequence[int] = (),
                 plan: Optional[DlSignalPlan] = None) -> HermitianPsd:
    """Isotropic quantizer alpha I for one RU meeting ``cap``.

    Args:
        cfg: Cluster configuration
        ch: Channel realization
        cap: Fronthaul cap of the RU
        link: Cost model (independent/Wyner-Ziv uplink, independent downlink)
        ru: RU index
        q: Quantizers already fixed for the ``previous`` RUs (Wyner-Ziv)
        previous: RUs decompressed before ``ru`` (Wyner-Ziv)
        plan: DlSignalPlan for downlink fitting

    Returns:
        M_R x M_R quantization covariance
    """
    cov = compressed_cov(cfg, ch, link, ru, q, previous, plan)
    alpha = bisect_isotropic_level(np.linalg.eigvalsh(cov), cap)
    return alpha * np.eye(cfg.ru_antennas, dtype=np.complex128)


def fit_quantizers(cfg: ClusterConfig, ch: ChannelRealization,
                   caps: Optional[Sequence[float]] = None,
                   link: FronthaulLink = FronthaulLink.UL_INDEP,
                   order: Optional[Sequence[int]] = None,
                   plan: Optional[DlSignalPlan] = None) -> QuantizationConfig:
    """Fit every RU's isotropic quantizer to its cap.

    Wyner-Ziv fits run in decompression ``order`` so each RU sees the
    quantizers of the RUs before it.
    """
    caps = list(cfg.fronthaul_caps if caps is None else caps)
    if len(caps) != cfg.n_ru:
        raise InvalidConfig(f"expected {cfg.n_ru} caps, got {len(caps)}")
    order = check_order(range(cfg.n_ru) if order is None else order, cfg.n_ru, "fitting order")
    blocks = [np.eye(cfg.ru_antennas, dtype=np.complex128) for _ in range(cfg.n_ru)]
    for pos, j in enumerate(order):
        current = QuantizationConfig.from_blocks(blocks) if link is FronthaulLink.UL_WZ else None
        blocks[j] = fit_q_to_cap(cfg, ch, caps[j], link, j, current, order[:pos], plan)
    q = QuantizationConfig.from_blocks(blocks)
    logger.debug(f"Fitted {link.value} quantizers: "
                 f"{[float(np.real(b[0, 0])) for b in blocks]}")
    return q


@dataclass
class ProbePoint:
    """Isotropic versus best diagonal quantizers at one SNR."""
    snr_db: float
    isotropic_alphas: List[float]
    isotropic_sum_rate: float
    best_diagonals: List[List[float]]
    best_sum_rate: float

    @property
    def gap(self) -> float:
        """Relative sum-rate loss of the isotropic quantizers."""
        if self.best_sum_rate <= 0:
            return 0.0
        return max((self.best_sum_rate - self.isotropic_sum_rate) / self.best_sum_rate, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "snr_db": self.snr_db,
            "isotropic_alphas": "|".join(f"{a:.6g}" for a in self.isotropic_alphas),
            "isotropic_sum_rate": self.isotropic_sum_rate,
            "best_sum_rate": self.best_sum_rate,
            "gap": self.gap,
            "best_diagonals": "|".join(",".join(f"{d:.6g}" for d in diag)
                                       for diag in self.best_diagonals),
        }


@dataclass
class ProbeReport:
    caps: List[float]
    points: List[ProbePoint] = field(default_factory=list)

    @property
    def total_budget(self) -> float:
        return float(sum(self.caps))

    def gap_at(self, snr_db: float) -> float:
        for p in self.points:
            if p.snr_db == snr_db:
                return p.gap
        raise KeyError(snr_db)


def _uplink_sum_rate(cfg: ClusterConfig, ch: ChannelRealization, q: QuantizationConfig) -> float:
    return float(sum(ul_rate_sic(cfg, ch, q, range(cfg.n_ue))))


def diagonal_level(cov: npt.ArrayLike, shape: npt.ArrayLike, cap: float) -> float:
    """Scale alpha such that alpha * diag(shape) costs ``cap`` on ``cov``.

    log2|C + alpha S| - log2|alpha S| equals the isotropic cost of the
    whitened covariance S^-1/2 C S^-1/2, so the isotropic bisection applies.
    """
    cov = np.asarray(cov, dtype=np.complex128)
    shape = np.asarray(shape, dtype=float)
    if shape.shape != (cov.shape[0],) or np.any(shape <= 0):
        raise InvalidConfig(f"diagonal shape must hold {cov.shape[0]} positive entries")
    w = 1.0 / np.sqrt(shape)
    return bisect_isotropic_level(np.linalg.eigvalsh(w[:, None] * cov * w[None, :]), cap)


class _DiagonalSearch:
    """Coordinate grid search over per-antenna quantization noise levels.

    Each RU keeps its own cap; the search moves one log-ratio of a diagonal
    entry against the RU's first entry at a time and refits the common
    scale by bisection.
    """

    def __init__(self, cfg: ClusterConfig, ch: ChannelRealization, caps: Sequence[float]):
        self.cfg = cfg
        self.ch = ch
        self.caps = list(caps)
        received = received_cov_ul(cfg, ch)
        self.covs = []
        for j in range(cfg.n_ru):
            s = cfg.ru_index_set([j])
            self.covs.append(block_submatrix(received, s, s))

    def blocks(self, log_shapes: List[np.ndarray]) -> List[np.ndarray]:
        blocks = []
        for cov, cap, log_shape in zip(self.covs, self.caps, log_shapes):
            shape = np.exp(log_shape)
            blocks.append(diagonal_level(cov, shape, cap) * np.diag(shape).astype(np.complex128))
        return blocks

    def sum_rate(self, log_shapes: List[np.ndarray]) -> float:
        return _uplink_sum_rate(self.cfg, self.ch, QuantizationConfig.from_blocks(self.blocks(log_shapes)))

    def run(self, max_sweeps: int, step: float = 1.0, min_step: float = 1e-3,
            bound: float = 20.0) -> tuple:
        log_shapes = [np.zeros(self.cfg.ru_antennas) for _ in range(self.cfg.n_ru)]
        best = self.sum_rate(log_shapes)
        sweeps = 0
        while step >= min_step and sweeps < max_sweeps and self.cfg.ru_antennas > 1:
            sweeps += 1
            improved = False
            for j in range(self.cfg.n_ru):
                for k in range(1, self.cfg.ru_antennas):
                    for sign in (1.0, -1.0):
                        value = log_shapes[j][k] + sign * step
                        if abs(value) > bound:
                            continue
                        trial = [s.copy() for s in log_shapes]
                        trial[j][k] = value
                        rate = self.sum_rate(trial)
                        if rate > best + 1e-12:
                            log_shapes, best, improved = trial, rate, True
            if not improved:
                step /= 2.0
        logger.debug(f"Diagonal search stopped after {sweeps} sweeps at step {step:.3g}")
        return log_shapes, best


def uniform_near_optimality_probe(cfg: ClusterConfig, ch: ChannelRealization,
                                  caps: Sequence[float], snr_list: Sequence[float],
                                  max_sweeps: int = 200) -> ProbeReport:
    """Compare isotropic quantizers with the best diagonal ones under the same caps.

    At each SNR every RU gets alpha_j I fitted to its own cap by
    :func:`fit_q_to_cap`, and separately the diagonal quantizer found by a
    coordinate grid search with the same per-RU caps. Sum rates use SIC with
    independent compression. The isotropic point is where the search
    starts, so the gap is never negative.

    Args:
        cfg: Cluster configuration; its uplink noise is reset per SNR
        ch: Channel realization
        caps: Per-RU caps
        snr_list: SNRs in dB relative to the mean UE transmit power

    Returns:
        ProbeReport with one point per SNR
    """
    caps = [float(c) for c in caps]
    if len(caps) != cfg.n_ru or any(c <= 0 for c in caps):
        raise InvalidConfig(f"need {cfg.n_ru} positive caps")
    report = ProbeReport(caps=caps)
    for snr_db in snr_list:
        at_snr = cfg.with_snr_db(snr_db)
        blocks = [fit_q_to_cap(at_snr, ch, caps[j], FronthaulLink.UL_INDEP, j) for j in range(cfg.n_ru)]
        alphas = [float(np.real(b[0, 0])) for b in blocks]
        iso_rate = _uplink_sum_rate(at_snr, ch, QuantizationConfig.from_blocks(blocks))
        search = _DiagonalSearch(at_snr, ch, caps)
        log_shapes, best_rate = search.run(max_sweeps)
        best_rate = max(best_rate, iso_rate)
        diagonals = [np.real(np.diag(b)).tolist() for b in search.blocks(log_shapes)]
        point = ProbePoint(float(snr_db), alphas, iso_rate, diagonals, best_rate)
        report.points.append(point)
        logger.info(f"Probe at {snr_db} dB: isotropic {iso_rate:.4f}, diagonal {best_rate:.4f}, "
                    f"gap {point.gap:.2%}")
    return report
