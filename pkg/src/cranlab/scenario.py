"""Cluster definition, channel realizations and quantization covariances."""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .constants import (
    CROSS_BLOCK_TOL,
    DEFAULT_RU_POWER_PER_ANTENNA,
    DEFAULT_UE_TX_POWER,
    SCENARIO_SCHEMA_VERSION,
    ChannelMode,
)
from .errors import (
    DimensionMismatch,
    InvalidConfig,
    InvalidOrder,
    NotHermitian,
    NotPsd,
    NonFiniteEntries,
    ScenarioNotFound,
    SchemaError,
)
from .matrix_core import (
    BlockIndexSet,
    ComplexMatrix,
    HermitianPsd,
    block_diag,
    block_submatrix,
    hermitian_psd,
    symmetrize,
)

logger = logging.getLogger(__name__)

# Philox key component separating uplink and independent downlink draws
_UL_STREAM = 0
_DL_STREAM = 1


@dataclass(frozen=True, eq=False)
class ClusterConfig:
    """One cluster of UEs and RUs.

    ``pathloss_db[j, i]`` is the loss from UE i to RU j; 0 dB gives unit
    channel variance. Fronthaul caps are in bits/s/Hz, normalized to the
    uplink bandwidth, and may be ``math.inf``.
    """
    n_ue: int
    n_ru: int
    fronthaul_caps: Tuple[float, ...]
    ue_antennas: int = 1
    ru_antennas: int = 1
    noise_var_ul: float = 1.0
    noise_var_dl: float = 1.0
    ue_tx_cov: Tuple[HermitianPsd, ...] = ()
    pathloss_db: Optional[np.ndarray] = None
    ru_power_per_antenna: float = DEFAULT_RU_POWER_PER_ANTENNA

    def __post_init__(self):
        for name in ("n_ue", "n_ru", "ue_antennas", "ru_antennas"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        caps = tuple(float(c) for c in self.fronthaul_caps)
        if len(caps) != self.n_ru:
            raise InvalidConfig(f"expected {self.n_ru} fronthaul caps, got {len(caps)}")
        if any(math.isnan(c) or c < 0 for c in caps):
            raise InvalidConfig(f"fronthaul caps must be >= 0: {caps}")
        object.__setattr__(self, "fronthaul_caps", caps)
        if not (self.noise_var_ul > 0 and self.noise_var_dl > 0):
            raise InvalidConfig("noise variances must be > 0")
        if not self.ru_power_per_antenna > 0:
            raise InvalidConfig("per-antenna RU power budget must be > 0")

        if not self.ue_tx_cov:
            unit = np.eye(self.ue_antennas, dtype=np.complex128) * (
                DEFAULT_UE_TX_POWER / self.ue_antennas)
            covs = tuple(unit.copy() for _ in range(self.n_ue))
        else:
            if len(self.ue_tx_cov) != self.n_ue:
                raise InvalidConfig(f"expected {self.n_ue} UE covariances, got {len(self.ue_tx_cov)}")
            covs = []
            for i, cov in enumerate(self.ue_tx_cov):
                try:
                    checked = hermitian_psd(cov)
                except (NotHermitian, NotPsd, NonFiniteEntries) as exc:
                    raise InvalidConfig(f"UE {i} transmit covariance: {exc}") from exc
                if checked.shape != (self.ue_antennas, self.ue_antennas):
                    raise InvalidConfig(f"UE {i} transmit covariance must be "
                                        f"{self.ue_antennas}x{self.ue_antennas}")
                covs.append(checked)
            covs = tuple(covs)
        object.__setattr__(self, "ue_tx_cov", covs)

        if self.pathloss_db is None:
            pathloss = np.zeros((self.n_ru, self.n_ue))
        else:
            pathloss = np.array(self.pathloss_db, dtype=float)
        if pathloss.shape != (self.n_ru, self.n_ue):
            raise InvalidConfig(f"pathloss matrix must be {self.n_ru}x{self.n_ue}, got {pathloss.shape}")
        if not np.all(np.isfinite(pathloss)):
            raise InvalidConfig("pathloss matrix has non-finite entries")
        object.__setattr__(self, "pathloss_db", pathloss)

    @property
    def ru_dim(self) -> int:
        """Total receive dimension N_R * M_R."""
        return self.n_ru * self.ru_antennas

    @property
    def ue_dim(self) -> int:
        """Total UE dimension N_U * M_U."""
        return self.n_ue * self.ue_antennas

    def ue_tx_blockdiag(self) -> ComplexMatrix:
        """Block-diagonal Sigma_{N_U} of the UE transmit covariances."""
        return block_diag(self.ue_tx_cov)

    def ru_index_set(self, indices: Sequence[int]) -> BlockIndexSet:
        """RU blocks of the stacked receive vector."""
        return BlockIndexSet.uniform(indices, self.n_ru, self.ru_antennas)

    def ue_index_set(self, indices: Sequence[int]) -> BlockIndexSet:
        """UE blocks of the stacked transmit vector."""
        return BlockIndexSet.uniform(indices, self.n_ue, self.ue_antennas)

    def with_caps(self, caps: Sequence[float]) -> "ClusterConfig":
        """Copy with new per-RU fronthaul caps."""
        return replace(self, fronthaul_caps=tuple(caps))

    def with_uniform_cap(self, cap: float) -> "ClusterConfig":
        """Copy with the same cap on every RU."""
        return self.with_caps([cap] * self.n_ru)

    def with_snr_db(self, snr_db: float) -> "ClusterConfig":
        """Copy whose uplink noise sits ``snr_db`` below the mean UE power."""
        mean_power = float(np.mean([np.real(np.trace(c)) for c in self.ue_tx_cov]))
        return replace(self, noise_var_ul=mean_power / 10.0 ** (snr_db / 10.0))

    def restricted_to_rus(self, active: Sequence[int]) -> "ClusterConfig":
        """Sub-cluster made of the given RUs, in the given order."""
        active = list(active)
        if not active:
            raise InvalidConfig("a sub-cluster needs at least one RU")
        return replace(
            self,
            n_ru=len(active),
            fronthaul_caps=tuple(self.fronthaul_caps[j] for j in active),
            pathloss_db=self.pathloss_db[active, :],
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the scenario JSON structure."""
        return {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "n_ue": self.n_ue,
            "n_ru": self.n_ru,
            "ue_antennas": self.ue_antennas,
            "ru_antennas": self.ru_antennas,
            "fronthaul_caps": [c if math.isfinite(c) else "inf" for c in self.fronthaul_caps],
            "noise_var_ul": self.noise_var_ul,
            "noise_var_dl": self.noise_var_dl,
            "ru_power_per_antenna": self.ru_power_per_antenna,
            "ue_tx_cov": [
                {"real": np.real(c).tolist(), "imag": np.imag(c).tolist()}
                for c in self.ue_tx_cov
            ],
            "pathloss_db": self.pathloss_db.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ClusterConfig":
        """Create a config from the scenario JSON structure."""
        if data.get("schema_version") != SCENARIO_SCHEMA_VERSION:
            raise SchemaError(f"unsupported scenario schema_version: {data.get('schema_version')!r}")
        try:
            n_ue = int(data["n_ue"])
            n_ru = int(data["n_ru"])
            ue_antennas = int(data.get("ue_antennas", 1))
            caps = [float(c) for c in data["fronthaul_caps"]]
            if "ue_tx_cov" in data:
                covs = tuple(
                    np.array(c["real"], dtype=float) + 1j * np.array(c.get("imag", 0.0), dtype=float)
                    for c in data["ue_tx_cov"]
                )
            elif "ue_tx_power" in data:
                powers = data["ue_tx_power"]
                covs = tuple(np.eye(ue_antennas) * float(p) / ue_antennas for p in powers)
            else:
                covs = ()
            return cls(
                n_ue=n_ue,
                n_ru=n_ru,
                fronthaul_caps=tuple(caps),
                ue_antennas=ue_antennas,
                ru_antennas=int(data.get("ru_antennas", 1)),
                noise_var_ul=float(data.get("noise_var_ul", 1.0)),
                noise_var_dl=float(data.get("noise_var_dl", 1.0)),
                ue_tx_cov=covs,
                pathloss_db=data.get("pathloss_db"),
                ru_power_per_antenna=float(
                    data.get("ru_power_per_antenna", DEFAULT_RU_POWER_PER_ANTENNA)),
            )
        except InvalidConfig:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid scenario: {exc}") from exc


def load_scenario(path: Union[str, Path]) -> ClusterConfig:
    """Load a scenario JSON file.

    Args:
        path: Scenario file path

    Returns:
        Validated ClusterConfig
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioNotFound(f"scenario file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"scenario {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"scenario {path} must be a JSON object")
    return ClusterConfig.from_dict(data)


def save_scenario(cfg: ClusterConfig, path: Union[str, Path]) -> None:
    """Write a scenario JSON file."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.to_dict(), f, indent=2)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Uplink and downlink channel matrices for one frame.

    ``h_ul`` is (N_R M_R) x (N_U M_U); ``h_dl`` is (N_U M_U) x (N_R M_R).
    """
    h_ul: ComplexMatrix
    h_dl: ComplexMatrix
    seed: int
    ru_antennas: int
    ue_antennas: int
    mode: ChannelMode = ChannelMode.TDD_RECIPROCAL
    frame: int = 0

    @property
    def n_ru(self) -> int:
        return self.h_ul.shape[0] // self.ru_antennas

    @property
    def n_ue(self) -> int:
        return self.h_ul.shape[1] // self.ue_antennas

    def ul_block(self, j: int, i: int) -> ComplexMatrix:
        """H^ul_{j,i}: UE i to RU j."""
        r, c = self.ru_antennas, self.ue_antennas
        return self.h_ul[j * r:(j + 1) * r, i * c:(i + 1) * c]

    def dl_block(self, i: int, j: int) -> ComplexMatrix:
        """H^dl_{i,j}: RU j to UE i."""
        r, c = self.ru_antennas, self.ue_antennas
        return self.h_dl[i * c:(i + 1) * c, j * r:(j + 1) * r]

    def ul_column(self, i: int) -> ComplexMatrix:
        """Collective uplink channel from UE i to all RUs."""
        c = self.ue_antennas
        return self.h_ul[:, i * c:(i + 1) * c]

    def dl_row(self, i: int) -> ComplexMatrix:
        """Collective downlink channel from all RUs to UE i."""
        c = self.ue_antennas
        return self.h_dl[i * c:(i + 1) * c, :]

    def restricted_to_rus(self, active: Sequence[int]) -> "ChannelRealization":
        """Channel seen by a subset of RUs, in the given order."""
        rows = BlockIndexSet.uniform(active, self.n_ru, self.ru_antennas).flat()
        return replace(self, h_ul=self.h_ul[rows, :], h_dl=self.h_dl[:, rows])


def _block_rng(seed: int, frame: int, stream: int, j: int, i: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, frame, stream, RU, UE)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, frame, stream, j, i])))


def _rayleigh_block(rng: np.random.Generator, shape: Tuple[int, int], variance: float) -> ComplexMatrix:
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_channel(cfg: ClusterConfig, seed: int,
                     mode: ChannelMode = ChannelMode.TDD_RECIPROCAL,
                     frame: int = 0) -> ChannelRealization:
    """Draw an i.i.d. Rayleigh channel realization.

    Each block H_{j,i} has CN(0, g_{j,i}) entries with g_{j,i} set by the
    pathloss. Block generators are keyed by block index, so adding RUs or
    UEs leaves existing blocks untouched.

    Args:
        cfg: Cluster configuration
        seed: Non-negative integer seed
        mode: TDD reciprocity or independent downlink draw
        frame: Frame counter, part of the generator key

    Returns:
        ChannelRealization
    """
    if seed < 0 or frame < 0:
        raise InvalidConfig("seed and frame must be non-negative")
    r, c = cfg.ru_antennas, cfg.ue_antennas
    h_ul = np.zeros((cfg.ru_dim, cfg.ue_dim), dtype=np.complex128)
    for j in range(cfg.n_ru):
        for i in range(cfg.n_ue):
            gain = 10.0 ** (-cfg.pathloss_db[j, i] / 10.0)
            rng = _block_rng(seed, frame, _UL_STREAM, j, i)
            h_ul[j * r:(j + 1) * r, i * c:(i + 1) * c] = _rayleigh_block(rng, (r, c), gain)

    if mode is ChannelMode.TDD_RECIPROCAL:
        h_dl = h_ul.T.copy()
    else:
        h_dl = np.zeros((cfg.ue_dim, cfg.ru_dim), dtype=np.complex128)
        for j in range(cfg.n_ru):
            for i in range(cfg.n_ue):
                gain = 10.0 ** (-cfg.pathloss_db[j, i] / 10.0)
                rng = _block_rng(seed, frame, _DL_STREAM, j, i)
                h_dl[i * c:(i + 1) * c, j * r:(j + 1) * r] = _rayleigh_block(rng, (c, r), gain)

    logger.debug(f"Generated {mode.value} channel seed={seed} frame={frame} "
                 f"({cfg.n_ru} RUs x {cfg.n_ue} UEs)")
    return ChannelRealization(h_ul=h_ul, h_dl=h_dl, seed=seed, ru_antennas=r,
                              ue_antennas=c, mode=mode, frame=frame)


def _check_dims(cfg: ClusterConfig, ch: ChannelRealization) -> None:
    if ch.h_ul.shape != (cfg.ru_dim, cfg.ue_dim) or ch.h_dl.shape != (cfg.ue_dim, cfg.ru_dim):
        raise DimensionMismatch(
            f"channel shapes {ch.h_ul.shape}/{ch.h_dl.shape} do not match cluster "
            f"({cfg.ru_dim}x{cfg.ue_dim})")


def ul_signal_cov(cfg: ClusterConfig, ch: ChannelRealization, ues: Sequence[int]) -> ComplexMatrix:
    """Sum over the given UEs of H_i Sigma_i H_i^H (no noise)."""
    _check_dims(cfg, ch)
    total = np.zeros((cfg.ru_dim, cfg.ru_dim), dtype=np.complex128)
    for i in ues:
        h_i = ch.ul_column(i)
        total += h_i @ cfg.ue_tx_cov[i] @ h_i.conj().T
    return symmetrize(total)


def received_cov_ul(cfg: ClusterConfig, ch: ChannelRealization) -> HermitianPsd:
    """Covariance of the stacked uplink received signal y^ul.

    Args:
        cfg: Cluster configuration
        ch: Channel realization

    Returns:
        (N_R M_R)-dimensional covariance sum_i H_i Sigma_i H_i^H + sigma^2 I
    """
    cov = ul_signal_cov(cfg, ch, range(cfg.n_ue))
    return cov + cfg.noise_var_ul * np.eye(cfg.ru_dim)


@dataclass(frozen=True, eq=False)
class QuantizationConfig:
    """Quantization-noise covariance over all RU antennas.

    Diagonal blocks are the per-RU Q_jj; cross blocks Q_jk carry correlation
    introduced by multivariate (downlink) compression.
    """
    cov: HermitianPsd
    n_ru: int
    ru_antennas: int = 1

    def __post_init__(self):
        cov = hermitian_psd(self.cov)
        if cov.shape != (self.n_ru * self.ru_antennas,) * 2:
            raise DimensionMismatch(
                f"quantization covariance {cov.shape} does not match {self.n_ru} RUs "
                f"x {self.ru_antennas} antennas")
        object.__setattr__(self, "cov", cov)

    @classmethod
    def from_blocks(cls, blocks: Sequence[npt.ArrayLike]) -> "QuantizationConfig":
        """Block-diagonal configuration from per-RU covariances."""
        blocks = [np.atleast_2d(np.asarray(b, dtype=np.complex128)) for b in blocks]
        return cls(block_diag(blocks), n_ru=len(blocks), ru_antennas=blocks[0].shape[0])

    @classmethod
    def isotropic(cls, alphas: Sequence[float], ru_antennas: int = 1) -> "QuantizationConfig":
        """alpha_j * I on every RU."""
        return cls.from_blocks([a * np.eye(ru_antennas) for a in alphas])

    def index_set(self, indices: Sequence[int]) -> BlockIndexSet:
        return BlockIndexSet.uniform(indices, self.n_ru, self.ru_antennas)

    def block(self, j: int, k: int) -> ComplexMatrix:
        """Q_{j,k}."""
        return block_submatrix(self.cov, self.index_set([j]), self.index_set([k]))

    def diag_block(self, j: int) -> HermitianPsd:
        """Q_{j,j}."""
        return self.block(j, j)

    def submatrix(self, indices: Sequence[int]) -> HermitianPsd:
        """Q over the given RUs."""
        s = self.index_set(indices)
        return block_submatrix(self.cov, s, s)

    def cross_blocks_zero(self, j: int, others: Sequence[int]) -> bool:
        """True if Q_{j,k} is zero for every k in ``others``."""
        if not others:
            return True
        cross = block_submatrix(self.cov, self.index_set([j]), self.index_set(others))
        return bool(np.linalg.norm(cross) <= CROSS_BLOCK_TOL * max(np.linalg.norm(self.cov), 1e-300))

    def is_block_diagonal(self) -> bool:
        """True if every cross-RU block is zero."""
        return all(self.cross_blocks_zero(j, [k for k in range(self.n_ru) if k != j])
                   for j in range(self.n_ru))

    def restricted_to_rus(self, active: Sequence[int]) -> "QuantizationConfig":
        """Quantization over a subset of RUs."""
        return QuantizationConfig(self.submatrix(active), n_ru=len(active),
                                  ru_antennas=self.ru_antennas)


def check_order(order: Sequence[int], n: int, what: str = "order") -> Tuple[int, ...]:
    """Validate that ``order`` is a permutation of 0..n-1."""
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(n)):
        raise InvalidOrder(f"{what} {list(order)} is not a permutation of 0..{n - 1}")
    return order


def check_quantization(cfg: ClusterConfig, q: QuantizationConfig) -> None:
    """Raise DimensionMismatch unless ``q`` covers exactly the cluster's RUs."""
    if q.n_ru != cfg.n_ru or q.ru_antennas != cfg.ru_antennas:
        raise DimensionMismatch(
            f"quantization config ({q.n_ru} RUs x {q.ru_antennas}) does not match cluster "
            f"({cfg.n_ru} RUs x {cfg.ru_antennas})")
