"""Command-line entry point."""

import argparse
import json
import logging
import os
import sys
from typing import Any, List, Optional

from dotenv import load_dotenv

from . import __version__
from .constants import (
    BASELINE_BITS_PER_COMPONENT,
    ENV_LOG_LEVEL,
    QuantizerKind,
)
from .dimensioning import (
    CpriProfile,
    compressed_line_rate,
    cpri_line_rate,
    cpri_option_for,
    exceeds_cpri_ceiling,
    harq_budget_check,
    max_one_way_latency_ms,
    split_c_bandwidth,
)
from .errors import CranLabError, InvalidConfig, SchemaError, ScenarioNotFound
from .experiment import compare_strategies, load_experiment_spec, run_experiment, validate_spec
from .iq_codec import CodecConfig, CompressedBitstream, decode, evaluate_codec
from .iq_frame import LTE_10MHZ_SAMPLE_RATE, read_raw_iq, write_raw_iq
from .splits import get_split_option

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_ENGINE = 3


def _print_json(data: Any) -> None:
    print(json.dumps(data, indent=2, default=str))


def cmd_run(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(args.spec)
    result = run_experiment(spec, workers=args.workers)
    print(f"{len(result.rows)} rows -> {result.table_path}")
    print(f"manifest -> {result.manifest_path}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(args.spec)
    table = compare_strategies(spec, workers=args.workers)
    _print_json(table.summary())
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(args.spec)
    scenario = validate_spec(spec)
    print(f"{args.spec}: {spec.kind.value}, {spec.n_cells} cells")
    if scenario is not None:
        print(f"scenario: {scenario.n_ru} RUs x {scenario.n_ue} UEs")
    return EXIT_OK


_FRAME_SETTINGS = ("sample_rate", "full_scale")


def _io_paths(args: argparse.Namespace) -> tuple:
    """Input and output paths from ``--in``/``--out`` or the positional form."""
    source = args.in_path or args.input
    target = args.out_path or args.output
    if not source or not target:
        raise InvalidConfig("need an input and an output path (--in/--out)")
    return source, target


def _read_json_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise InvalidConfig(f"cannot read codec config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: codec config must be a JSON object")
    return data


def _write_report(path: Optional[str], report: dict) -> None:
    _print_json(report)
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, default=str)


def _codec_config(args: argparse.Namespace, settings: dict) -> CodecConfig:
    """Config file settings, with explicit command-line flags taking precedence."""
    data = {k: v for k, v in settings.items() if k not in _FRAME_SETTINGS}
    for key, value in (
        ("resample_ratio", args.ratio),
        ("block_len", args.block_len),
        ("quantizer", args.quantizer),
        ("bits_per_component", args.bits),
        ("noise_shaping", args.noise_shaping),
        ("entropy_stage", None if args.no_entropy is None else not args.no_entropy),
    ):
        if value is not None:
            data[key] = value
    return CodecConfig.from_dict(data)


def cmd_iq_encode(args: argparse.Namespace) -> int:
    source, target = _io_paths(args)
    settings = _read_json_config(args.config)
    sample_rate = args.sample_rate or settings.get("sample_rate", LTE_10MHZ_SAMPLE_RATE)
    full_scale = args.full_scale or settings.get("full_scale", 1.0)
    cfg = _codec_config(args, settings)
    frame = read_raw_iq(source, float(sample_rate), float(full_scale))
    bs, _, report = evaluate_codec(frame, cfg)
    with open(target, "wb") as f:
        f.write(bs.to_bytes())
    _write_report(args.report, {**report.to_dict(), "config": cfg.to_dict()})
    return EXIT_OK


def cmd_iq_decode(args: argparse.Namespace) -> int:
    source, target = _io_paths(args)
    with open(source, "rb") as f:
        bs = CompressedBitstream.from_bytes(f.read())
    settings = _read_json_config(args.config)
    if settings:
        expected = CodecConfig.from_dict({k: v for k, v in settings.items()
                                          if k not in _FRAME_SETTINGS})
        if expected != bs.config:
            raise InvalidConfig(f"{source} was encoded with {bs.config.to_dict()}, "
                                f"not {expected.to_dict()}")
    frame = decode(bs)
    write_raw_iq(frame, target)
    _write_report(args.report, {"samples": len(frame), "sample_rate": frame.sample_rate,
                                "config": bs.config.to_dict(), "output": str(target)})
    return EXIT_OK


def cmd_dim_cpri(args: argparse.Namespace) -> int:
    profile = CpriProfile(args.sample_rate, args.bits, args.antennas)
    rate = cpri_line_rate(profile)
    out = {
        "line_rate_bps": rate,
        "cpri_option": cpri_option_for(rate),
        "exceeds_ceiling": exceeds_cpri_ceiling(rate),
    }
    if args.compression_ratio is not None:
        compressed = compressed_line_rate(profile, args.compression_ratio)
        out["compressed_line_rate_bps"] = compressed
        out["compressed_cpri_option"] = cpri_option_for(compressed)
    _print_json(out)
    return EXIT_OK


def cmd_dim_split(args: argparse.Namespace) -> int:
    verdicts = harq_budget_check(args.latency_ms, args.processing_ms, args.budget_ms)
    out = {
        "max_one_way_latency_ms": max_one_way_latency_ms(args.processing_ms, args.budget_ms),
        "splits": {
            split.value: {**verdict.to_dict(),
                          "display_name": get_split_option(split).display_name}
            for split, verdict in verdicts.items()
        },
    }
    if args.user_plane_bps is not None:
        out["split_c_bandwidth_bps"] = split_c_bandwidth(args.user_plane_bps)
    _print_json(out)
    return EXIT_OK


def _add_io_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", nargs="?", help="input file (same as --in)")
    p.add_argument("output", nargs="?", help="output file (same as --out)")
    p.add_argument("--in", dest="in_path", default=None)
    p.add_argument("--out", dest="out_path", default=None)
    p.add_argument("--config", default=None, help="codec settings JSON")
    p.add_argument("--report", default=None, help="write the JSON report here too")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cranlab",
        description="C-RAN fronthaul compression, capacity and dimensioning toolkit",
    )
    parser.add_argument("--version", action="version", version=f"cranlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, help_text in (
        ("run", cmd_run, "run an experiment spec"),
        ("compare", cmd_compare, "compare cooperative and independent compression"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("spec", help="experiment spec JSON")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: CRANLAB_WORKERS or 1)")
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="validate an experiment spec and its scenario")
    p.add_argument("spec", help="experiment spec JSON")
    p.set_defaults(func=cmd_validate)

    iq = sub.add_parser("iq", help="IQ compression codec").add_subparsers(dest="iq_command",
                                                                            required=True)
    p = iq.add_parser("encode", help="compress a raw float32 IQ file")
    _add_io_arguments(p)
    p.add_argument("--sample-rate", "--samplerate", dest="sample_rate", type=float, default=None,
                   help=f"input sample rate in Hz (default {LTE_10MHZ_SAMPLE_RATE:g})")
    p.add_argument("--full-scale", type=float, default=None)
    p.add_argument("--bits", type=int, default=None, help="bits per I/Q component")
    p.add_argument("--quantizer", choices=[k.value for k in QuantizerKind], default=None)
    p.add_argument("--ratio", default=None, help="resampling ratio, e.g. 3/4")
    p.add_argument("--block-len", type=int, default=None)
    p.add_argument("--noise-shaping", action="store_const", const=True, default=None)
    p.add_argument("--no-entropy", action="store_const", const=True, default=None)
    p.set_defaults(func=cmd_iq_encode)

    p = iq.add_parser("decode", help="expand a compressed IQ file to raw float32")
    _add_io_arguments(p)
    p.set_defaults(func=cmd_iq_decode)

    dim = sub.add_parser("dim", help="fronthaul dimensioning").add_subparsers(dest="dim_command",
                                                                               required=True)
    p = dim.add_parser("cpri", help="CPRI line rate of a sampling profile")
    p.add_argument("--samplerate", "--sample-rate", dest="sample_rate", type=float, default=30.72e6)
    p.add_argument("--bits", type=int, default=BASELINE_BITS_PER_COMPONENT)
    p.add_argument("--antennas", type=int, default=1)
    p.add_argument("--compression-ratio", type=float, default=None)
    p.set_defaults(func=cmd_dim_cpri)

    p = dim.add_parser("split", help="Layer-2 split feasibility at a fronthaul latency")
    p.add_argument("--latency-ms", type=float, required=True)
    p.add_argument("--processing-ms", type=float, default=1.0)
    p.add_argument("--budget-ms", type=float, default=3.0)
    p.add_argument("--user-plane-bps", type=float, default=None)
    p.set_defaults(func=cmd_dim_split)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI; returns the process exit code."""
    load_dotenv()
    logging.basicConfig(
        level=os.getenv(ENV_LOG_LEVEL, "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ScenarioNotFound, InvalidConfig) as e:
        logger.error(f"{e}")
        return EXIT_SCHEMA
    except CranLabError as e:
        logger.error(f"{e}")
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
