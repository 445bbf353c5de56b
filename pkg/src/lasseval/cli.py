"""Command-line interface.

Subcommands: score, mix, sweep, corr, embed. Exit codes: 0 success,
1 usage error, 2 partial record failures, 3 fatal (manifest or backend
unusable).
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

from . import __version__
from .audio_io import read_wav, to_mono, write_wav
from .embedding import BackendConfig, make_backend, parse_backend_spec
from .errors import BackendError, LassEvalError
from .harness import (
    METRIC_NAMES,
    correlate_report,
    dump_report,
    evaluate_manifest,
    load_manifest,
    load_pairs_manifest,
    precompute_embeddings,
    run_sweep,
)
from .mixer import STRATEGIES, SdrLevelGrid, mix_at_sdr, white_noise
from .sdr_metrics import sdr

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_FATAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for
    partial record failures, so remap usage errors to 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _metrics_csv(text: str) -> list[str]:
    names = [item.strip() for item in text.split(",") if item.strip()]
    if not names:
        raise argparse.ArgumentTypeError("metrics list is empty")
    unknown = [name for name in names if name not in METRIC_NAMES]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown metrics {unknown}; choose from {', '.join(METRIC_NAMES)}"
        )
    return names


def _backend_spec(text: str) -> BackendConfig:
    try:
        return parse_backend_spec(text)
    except BackendError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _levels_spec(text: str) -> SdrLevelGrid:
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("range form is start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise ValueError("step must be positive")
            levels = []
            value = start
            while value <= stop + 1e-9:
                levels.append(round(value, 9))
                value += step
        else:
            levels = [float(p) for p in text.split(",") if p.strip()]
        return SdrLevelGrid(tuple(levels))
    except (ValueError, LassEvalError) as exc:
        raise argparse.ArgumentTypeError(f"bad levels {text!r}: {exc}") from exc


def _strategies_csv(text: str) -> list[str]:
    names = [item.strip() for item in text.split(",") if item.strip()]
    unknown = [name for name in names if name not in STRATEGIES]
    if not names or unknown:
        raise argparse.ArgumentTypeError(
            f"strategies must be a csv subset of {', '.join(STRATEGIES)}"
        )
    return names


def build_parser() -> _Parser:
    parser = _Parser(prog="lasseval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lasseval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_score = sub.add_parser("score", help="evaluate a manifest and write a metric report")
    p_score.add_argument("--manifest", required=True, type=Path)
    p_score.add_argument("--backend", required=True, type=_backend_spec)
    p_score.add_argument("--metrics", required=True, type=_metrics_csv)
    p_score.add_argument("--out", required=True, type=Path)
    p_score.add_argument("--workers", type=int, default=1)
    p_score.set_defaults(func=_cmd_score)

    p_mix = sub.add_parser("mix", help="mix noise into a source at an exact SDR")
    p_mix.add_argument("--source", required=True, type=Path)
    p_mix.add_argument(
        "--noise",
        required=True,
        help="noise WAV path, or the literal 'white' for seeded Gaussian noise",
    )
    p_mix.add_argument("--sdr", required=True, type=float, dest="target_sdr_db")
    p_mix.add_argument("--out", required=True, type=Path)
    p_mix.add_argument("--seed", type=int, default=0)
    p_mix.set_defaults(func=_cmd_mix)

    p_sweep = sub.add_parser("sweep", help="mixture sweep over strategies and SDR levels")
    # let values like -20:20:5 or -20,-15 pass as arguments, not flags
    p_sweep._negative_number_matcher = re.compile(r"^-\d")
    p_sweep.add_argument("--pairs", required=True, type=Path)
    p_sweep.add_argument("--levels", required=True, type=_levels_spec)
    p_sweep.add_argument("--strategies", required=True, type=_strategies_csv)
    p_sweep.add_argument("--backend", required=True, type=_backend_spec)
    p_sweep.add_argument("--out-dir", required=True, type=Path)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_corr = sub.add_parser("corr", help="correlate two metrics of a report")
    p_corr.add_argument("--report", required=True, type=Path)
    p_corr.add_argument("--x", required=True, dest="x_metric")
    p_corr.add_argument("--y", required=True, dest="y_metric")
    p_corr.set_defaults(func=_cmd_corr)

    p_embed = sub.add_parser("embed", help="precompute service embeddings into a cache")
    p_embed.add_argument("--manifest", required=True, type=Path)
    p_embed.add_argument("--service", required=True)
    p_embed.add_argument("--cache", required=True, type=Path)
    p_embed.add_argument("--workers", type=int, default=1)
    p_embed.set_defaults(func=_cmd_embed)

    return parser


def _cmd_score(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    backend = make_backend(args.backend)
    report, failed = evaluate_manifest(records, backend, args.metrics, workers=args.workers)
    dump_report(report, args.out)
    for name in args.metrics:
        agg = report["aggregates"][name]
        if agg.get("count"):
            print(
                f"{name}: mean={agg['mean']:.6f} stddev={agg['stddev']:.6f} "
                f"count={agg['count']} excluded={agg['excluded']}"
            )
        else:
            print(f"{name}: no values (excluded={agg['excluded']})")
    print(f"report written to {args.out}")
    if failed:
        print(f"{failed} of {len(records)} records failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_mix(args: argparse.Namespace) -> int:
    source = to_mono(read_wav(args.source))
    if args.noise == "white":
        noise = white_noise(source.samples.size, source.sample_rate, args.seed)
        seed = args.seed
    else:
        noise = to_mono(read_wav(args.noise))
        seed = None
    mixture, plan = mix_at_sdr(source, noise, args.target_sdr_db, seed=seed)
    write_wav(mixture, args.out, "float32")
    measured = sdr(source.samples, mixture.samples)
    print(json.dumps(plan.to_json_dict() | {"out": str(args.out), "measured_sdr_db": measured}))
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    pairs = load_pairs_manifest(args.pairs)
    backend = make_backend(args.backend)
    rows = run_sweep(pairs, args.levels, args.strategies, backend, args.out_dir, args.seed)
    print(f"wrote {len(rows)} rows to {args.out_dir / 'clapscores.csv'}")
    return EXIT_OK


def _cmd_corr(args: argparse.Namespace) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    result, excluded = correlate_report(report, args.x_metric, args.y_metric)
    print(
        json.dumps(
            {
                "x": args.x_metric,
                "y": args.y_metric,
                "r": result.r,
                "n": result.n,
                "t_stat": result.t_stat if math.isfinite(result.t_stat) else None,
                "p_value": result.p_value,
                "excluded": excluded,
            }
        )
    )
    return EXIT_OK


def _cmd_embed(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    backend = make_backend(BackendConfig(kind="service", endpoint=args.service))
    written, skipped, failures = precompute_embeddings(
        records, backend, args.cache, workers=args.workers
    )
    print(f"{written} embeddings written, {skipped} already cached")
    if failures:
        for label, message in failures:
            print(f"FAILED {label}: {message}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (LassEvalError, OSError) as exc:
        print(f"lasseval: fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
