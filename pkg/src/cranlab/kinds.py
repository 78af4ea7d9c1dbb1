"""Experiment kind configurations and cell runners."""

import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .constants import (
    ChannelMode,
    DownlinkCompression,
    ExperimentKind,
    FronthaulLink,
    LinkDirection,
    Precoder,
    QuantizerKind,
    Receiver,
    UplinkCompression,
)
from .dimensioning import CpriProfile, cpri_line_rate, cpri_option_for, harq_budget_check
from .downlink import (
    DownlinkStrategy,
    dl_fronthaul_indep,
    evaluate_downlink,
    zero_forcing_plan,
)
from .errors import SchemaError
from .iq_codec import CodecConfig, evaluate_codec
from .iq_frame import synthetic_ofdm_frame
from .joint_design import design_multivariate_q
from .quantizer import fit_quantizers
from .rrm import SUMMARY_FIELDS, RrmPolicyConfig
from .rrm import run as simulate_rrm
from .scenario import ClusterConfig, generate_channel
from .splits import all_splits
from .uplink import (
    UplinkStrategy,
    default_decompression_order,
    evaluate_uplink,
    ul_fronthaul_indep,
    ul_fronthaul_wyner_ziv,
)

logger = logging.getLogger(__name__)


@dataclass
class CellResult:
    """One CSV row plus optional extra tables (name -> (columns, rows))."""
    row: Dict[str, Any]
    tables: Dict[str, Tuple[List[str], List[Dict[str, Any]]]] = field(default_factory=dict)


# Runner signature: (scenario or None, axis values, seed, params) -> CellResult
Runner = Callable[[Optional[ClusterConfig], Dict[str, Any], int, Dict[str, Any]], CellResult]


@dataclass(frozen=True)
class KindConfig:
    """Configuration for an experiment kind."""
    kind: ExperimentKind
    axes: Dict[str, Callable[[Any], Any]]  # axis name -> value parser
    required_params: Tuple[str, ...]
    columns: Tuple[str, ...]
    runner: Runner
    needs_scenario: bool
    # (label, numerator column, denominator column) for compare_strategies
    comparisons: Tuple[Tuple[str, str, str], ...] = ()
    description: str = ""


def parse_cap(value: Any) -> float:
    """Fronthaul cap; ``"inf"`` and JSON ``Infinity`` mean uncapped."""
    cap = float(value)
    if not cap > 0:
        raise ValueError(f"cap must be > 0, got {value!r}")
    return cap


def parse_positive(value: Any) -> float:
    x = float(value)
    if not x > 0:
        raise ValueError(f"expected a positive number, got {value!r}")
    return x


def parse_non_negative(value: Any) -> float:
    x = float(value)
    if x < 0:
        raise ValueError(f"expected a non-negative number, got {value!r}")
    return x


def parse_int(value: Any) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"expected an integer, got {value!r}")
    return int(value)


def parse_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true or false, got {value!r}")
    return value


def parse_ratio(value: Any) -> str:
    # kept as text so it survives JSON and CSV unchanged
    ratio = Fraction(str(value))
    if ratio <= 0:
        raise ValueError(f"ratio must be positive, got {value!r}")
    return str(ratio)


# Shared cluster axes
_CLUSTER_AXES = {"cap": parse_cap, "snr_db": float}


def _cell_cluster(scenario: ClusterConfig, values: Dict[str, Any],
                  link: LinkDirection = LinkDirection.UPLINK) -> ClusterConfig:
    cfg = scenario
    if "cap" in values:
        cfg = cfg.with_uniform_cap(values["cap"])
    if "snr_db" in values:
        if link is LinkDirection.UPLINK:
            cfg = cfg.with_snr_db(values["snr_db"])
        else:
            # per-UE noise below the per-RU transmit budget
            budget = cfg.ru_antennas * cfg.ru_power_per_antenna
            cfg = replace(cfg, noise_var_dl=budget / 10.0 ** (values["snr_db"] / 10.0))
    return cfg


def _channel_mode(params: Dict[str, Any]) -> ChannelMode:
    return ChannelMode(params.get("channel_mode", ChannelMode.TDD_RECIPROCAL.value))


def run_ul_rates(scenario: Optional[ClusterConfig], values: Dict[str, Any], seed: int,
                 params: Dict[str, Any]) -> CellResult:
    """Sum rates of the four uplink receiver/compression combinations.

    Each compression mode gets its own quantizers fitted to the caps.
    """
    cfg = _cell_cluster(scenario, values)
    ch = generate_channel(cfg, seed, _channel_mode(params))
    order = default_decompression_order(cfg, ch)
    quantizers = {
        UplinkCompression.INDEPENDENT: fit_quantizers(cfg, ch, link=FronthaulLink.UL_INDEP),
        UplinkCompression.WYNER_ZIV: fit_quantizers(cfg, ch, link=FronthaulLink.UL_WZ, order=order),
    }
    row: Dict[str, Any] = {}
    for compression, q in quantizers.items():
        for receiver in Receiver:
            strategy = UplinkStrategy(receiver, compression, decompression_order=tuple(order))
            report = evaluate_uplink(cfg, ch, q, strategy)
            row[f"sum_rate_{receiver.value}_{_short(compression)}"] = report.sum_rate
        row[f"fronthaul_{_short(compression)}"] = sum(report.per_ru_fronthaul)
    return CellResult(row)


def run_dl_rates(scenario: Optional[ClusterConfig], values: Dict[str, Any], seed: int,
                 params: Dict[str, Any]) -> CellResult:
    """Sum rates of the four downlink precoder/compression combinations.

    The plan is zero-forcing at full budget. Independent compression uses
    per-RU fitted quantizers; multivariate compression uses the correlated
    design for each precoder.
    """
    cfg = _cell_cluster(scenario, values, LinkDirection.DOWNLINK)
    ch = generate_channel(cfg, seed, _channel_mode(params))
    plan = zero_forcing_plan(cfg, ch)
    q_indep = fit_quantizers(cfg, ch, link=FronthaulLink.DL_INDEP, plan=plan)
    row: Dict[str, Any] = {}
    for precoder in Precoder:
        report = evaluate_downlink(cfg, ch, plan, q_indep,
                                   DownlinkStrategy(precoder, DownlinkCompression.INDEPENDENT))
        row[f"sum_rate_{precoder.value}_indep"] = report.sum_rate
        design = design_multivariate_q(cfg, ch, plan, precoder=precoder)
        report = evaluate_downlink(cfg, ch, plan, design.q,
                                   DownlinkStrategy(precoder, DownlinkCompression.MULTIVARIATE))
        row[f"sum_rate_{precoder.value}_multivariate"] = report.sum_rate
        row[f"null_mix_{precoder.value}"] = design.null_mix
    return CellResult(row)


def run_quantizer_fit(scenario: Optional[ClusterConfig], values: Dict[str, Any], seed: int,
                      params: Dict[str, Any]) -> CellResult:
    """Fit quantizers to the caps and report how tightly the caps are met."""
    link = FronthaulLink(params.get("link", FronthaulLink.UL_INDEP.value))
    direction = LinkDirection.DOWNLINK if link is FronthaulLink.DL_INDEP else LinkDirection.UPLINK
    cfg = _cell_cluster(scenario, values, direction)
    ch = generate_channel(cfg, seed, _channel_mode(params))
    if link is FronthaulLink.DL_INDEP:
        plan = zero_forcing_plan(cfg, ch)
        q = fit_quantizers(cfg, ch, link=link, plan=plan)
        costs = dl_fronthaul_indep(plan, q)
    elif link is FronthaulLink.UL_WZ:
        order = default_decompression_order(cfg, ch)
        q = fit_quantizers(cfg, ch, link=link, order=order)
        costs = ul_fronthaul_wyner_ziv(cfg, ch, q, order)
    else:
        q = fit_quantizers(cfg, ch, link=link)
        costs = ul_fronthaul_indep(cfg, ch, q)
    alphas = [float(np.real(q.diag_block(j)[0, 0])) for j in range(cfg.n_ru)]
    residuals = [abs(c - cap) for c, cap in zip(costs, cfg.fronthaul_caps) if np.isfinite(cap)]
    return CellResult({
        "mean_alpha": float(np.mean(alphas)),
        "min_alpha": float(np.min(alphas)),
        "total_fronthaul": float(sum(costs)),
        "max_residual": max(residuals) if residuals else 0.0,
    })


def run_iq_codec(scenario: Optional[ClusterConfig], values: Dict[str, Any], seed: int,
                 params: Dict[str, Any]) -> CellResult:
    """Encode a synthetic OFDM frame and report size and distortion."""
    codec = CodecConfig(
        resample_ratio=values.get("resample_ratio", params.get("resample_ratio", "1")),
        block_len=values.get("block_len", params.get("block_len", 32)),
        quantizer=QuantizerKind(values.get("quantizer", params.get("quantizer", "lloyd_max"))),
        bits_per_component=values.get("bits_per_component", params.get("bits_per_component", 8)),
        noise_shaping=values.get("noise_shaping", params.get("noise_shaping", False)),
        entropy_stage=values.get("entropy_stage", params.get("entropy_stage", True)),
    )
    kwargs = {}
    if "occupied_fraction" in params:
        kwargs["occupied_fraction"] = float(params["occupied_fraction"])
    frame = synthetic_ofdm_frame(int(params["frame_len"]), seed=seed, **kwargs)
    _, _, report = evaluate_codec(frame, codec)
    return CellResult({k: report.to_dict()[k] for k in IQ_CODEC_COLUMNS})


def run_dimensioning(scenario: Optional[ClusterConfig], values: Dict[str, Any], seed: int,
                     params: Dict[str, Any]) -> CellResult:
    """CPRI line rate of a profile and split feasibility at a latency."""
    profile = CpriProfile(
        sample_rate=values.get("sample_rate", params.get("sample_rate", 30.72e6)),
        bits_per_component=values.get("bits_per_component", params.get("bits_per_component", 15)),
        antennas=values.get("antennas", params.get("antennas", 1)),
    )
    rate = cpri_line_rate(profile)
    option = cpri_option_for(rate)
    verdicts = harq_budget_check(values.get("latency_ms", params.get("latency_ms", 0.0)),
                                 values.get("processing_ms", params.get("processing_ms", 1.0)))
    row: Dict[str, Any] = {
        "cpri_line_rate_bps": rate,
        "cpri_option": "" if option is None else option,
        "round_trip_ms": next(iter(verdicts.values())).round_trip_ms,
    }
    for split, verdict in verdicts.items():
        row[f"feasible_{split.value}"] = verdict.feasible
    return CellResult(row)


def run_rrm(scenario: Optional[ClusterConfig], values: Dict[str, Any], seed: int,
            params: Dict[str, Any]) -> CellResult:
    """Drift-plus-penalty simulation summary; the frame trace rides along."""
    link = LinkDirection(params.get("link", LinkDirection.UPLINK.value))
    cfg = _cell_cluster(scenario, values, link)
    arrivals = params["arrival_means"]
    if not isinstance(arrivals, list):
        arrivals = [float(arrivals)] * cfg.n_ue
    policy = RrmPolicyConfig(
        arrival_means=tuple(arrivals),
        v=values.get("v", params.get("v", 1.0)),
        horizon=int(values.get("horizon", params.get("horizon", 100))),
        link=link,
        p_static=float(params.get("p_static", 1.0)),
        p_tx_ul=float(params.get("p_tx_ul", 0.0)),
        frame_bits=float(params.get("frame_bits", 1.0)),
        precoder=Precoder(params.get("precoder", Precoder.DPC.value)),
        channel_mode=_channel_mode(params),
    )
    trace = simulate_rrm(policy, cfg, seed)
    tables = {}
    if params.get("write_traces", False):
        coords = "_".join(f"{k}{v}" for k, v in values.items())
        name = f"trace_{coords}_seed{seed}.csv" if coords else f"trace_seed{seed}.csv"
        tables[name] = (trace.columns, trace.rows())
    return CellResult(trace.summary(), tables)


def _short(compression: Any) -> str:
    return {UplinkCompression.INDEPENDENT: "indep", UplinkCompression.WYNER_ZIV: "wz"}[compression]


IQ_CODEC_COLUMNS = ("compression_ratio", "bits_per_component", "evm", "sqnr_db",
                    "index_entropy", "predicted_evm", "encoded_bytes")


KIND_CONFIGS: Dict[ExperimentKind, KindConfig] = {
    ExperimentKind.UL_RATES: KindConfig(
        kind=ExperimentKind.UL_RATES,
        axes=dict(_CLUSTER_AXES),
        required_params=(),
        columns=("sum_rate_linear_indep", "sum_rate_sic_indep", "fronthaul_indep",
                 "sum_rate_linear_wz", "sum_rate_sic_wz", "fronthaul_wz"),
        runner=run_ul_rates,
        needs_scenario=True,
        comparisons=(("sic", "sum_rate_sic_wz", "sum_rate_sic_indep"),
                     ("linear", "sum_rate_linear_wz", "sum_rate_linear_indep")),
        description="Uplink sum rates, linear/SIC x independent/Wyner-Ziv",
    ),
    ExperimentKind.DL_RATES: KindConfig(
        kind=ExperimentKind.DL_RATES,
        axes=dict(_CLUSTER_AXES),
        required_params=(),
        columns=("sum_rate_linear_indep", "sum_rate_linear_multivariate", "null_mix_linear",
                 "sum_rate_dpc_indep", "sum_rate_dpc_multivariate", "null_mix_dpc"),
        runner=run_dl_rates,
        needs_scenario=True,
        comparisons=(("linear", "sum_rate_linear_multivariate", "sum_rate_linear_indep"),
                     ("dpc", "sum_rate_dpc_multivariate", "sum_rate_dpc_indep")),
        description="Downlink sum rates, linear/DPC x independent/multivariate",
    ),
    ExperimentKind.QUANTIZER_FIT: KindConfig(
        kind=ExperimentKind.QUANTIZER_FIT,
        axes=dict(_CLUSTER_AXES),
        required_params=(),
        columns=("mean_alpha", "min_alpha", "total_fronthaul", "max_residual"),
        runner=run_quantizer_fit,
        needs_scenario=True,
        description="Isotropic quantizer levels fitted to fronthaul caps",
    ),
    ExperimentKind.IQ_CODEC: KindConfig(
        kind=ExperimentKind.IQ_CODEC,
        axes={
            "bits_per_component": parse_int,
            "quantizer": lambda v: QuantizerKind(v).value,
            "resample_ratio": parse_ratio,
            "block_len": parse_int,
            "noise_shaping": parse_bool,
            "entropy_stage": parse_bool,
        },
        required_params=("frame_len",),
        columns=IQ_CODEC_COLUMNS,
        runner=run_iq_codec,
        needs_scenario=False,
        description="IQ compression ratio and EVM on synthetic OFDM frames",
    ),
    ExperimentKind.DIMENSIONING: KindConfig(
        kind=ExperimentKind.DIMENSIONING,
        axes={
            "latency_ms": parse_non_negative,
            "processing_ms": parse_non_negative,
            "sample_rate": parse_positive,
            "bits_per_component": parse_int,
            "antennas": parse_int,
        },
        required_params=(),
        columns=("cpri_line_rate_bps", "cpri_option", "round_trip_ms")
        + tuple(f"feasible_{s.id.value}" for s in all_splits()),
        runner=run_dimensioning,
        needs_scenario=False,
        description="CPRI line rates and Layer-2 split latency feasibility",
    ),
    ExperimentKind.RRM: KindConfig(
        kind=ExperimentKind.RRM,
        axes={"v": parse_non_negative, "horizon": parse_int, **_CLUSTER_AXES},
        required_params=("arrival_means",),
        columns=SUMMARY_FIELDS,
        runner=run_rrm,
        needs_scenario=True,
        description="Drift-plus-penalty RU activation, one summary row per run",
    ),
}


def get_kind_config(kind: Any) -> KindConfig:
    """Get configuration for an experiment kind.

    Args:
        kind: ExperimentKind or its string value

    Returns:
        KindConfig instance
    """
    try:
        return KIND_CONFIGS[ExperimentKind(kind)]
    except ValueError as exc:
        raise SchemaError(f"unknown experiment kind {kind!r}") from exc
