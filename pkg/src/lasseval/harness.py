"""Batch orchestration: manifests in, metric reports and sweep datasets out.

Records are independent and may be evaluated in parallel; the report is
assembled as a single id-sorted merge so its bytes never depend on worker
count. Failed records are marked and kept, never dropped, so aggregate
counts stay honest.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .audio_io import AudioClip, read_wav, to_mono, write_wav
from .clap_metrics import clapscore, ref_clapscore
from .embedding import (
    MODALITY_AUDIO,
    MODALITY_TEXT,
    EmbeddingBackend,
    TextQuery,
    audio_payload,
    cache_key,
    cache_put,
    text_payload,
)
from .errors import LassEvalError, ManifestError, MetricInputError
from .mixer import STRATEGY_OTHER_CONTENT, SdrLevelGrid, build_strategy_mixture
from .rng import derive_seed
from .sdr_metrics import align_lengths, sdr, si_sdr
from .stats import CorrelationResult, aggregate, pearson, pearson_p_value, t_statistic

METRIC_NAMES = ("sdr", "sdri", "sisdr", "clapscore", "clapscore_i", "ref_clapscore")

_NEEDS_REFERENCE = {"sdr", "sdri", "sisdr", "ref_clapscore"}
_NEEDS_MIXTURE = {"sdri", "clapscore_i"}
_CLAP_AFTER = {"clapscore", "clapscore_i", "ref_clapscore"}

SKIP_NO_REFERENCE = "no_reference"
SKIP_RECORD_ERROR = "record_error"


@dataclass(frozen=True)
class EvalRecord:
    id: str
    mixture_path: Path
    separated_path: Path
    reference_path: Path | None
    query: TextQuery


@dataclass(frozen=True)
class SweepPair:
    id: str
    source_path: Path
    companion_path: Path | None
    query: TextQuery


def _parse_lines(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{line_no}: malformed JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}:{line_no}: record must be a JSON object")
        yield line_no, obj


def _require_fields(obj: dict, fields: tuple[str, ...], path: Path, line_no: int) -> None:
    for field_name in fields:
        if field_name not in obj or obj[field_name] in (None, ""):
            raise ManifestError(f"{path}:{line_no}: missing required field '{field_name}'")


def _query_from(obj: dict, path: Path, line_no: int) -> TextQuery:
    try:
        return TextQuery(str(obj["query"]))
    except MetricInputError as exc:
        raise ManifestError(f"{path}:{line_no}: {exc}") from exc


def load_manifest(path: str | Path) -> list[EvalRecord]:
    """Parse a JSON-lines evaluation manifest.

    Relative audio paths are resolved against the manifest's directory so
    datasets stay relocatable.
    """
    path = Path(path)
    base = path.parent
    records: list[EvalRecord] = []
    seen: dict[str, int] = {}
    for line_no, obj in _parse_lines(path):
        _require_fields(obj, ("id", "mixture_path", "separated_path", "query"), path, line_no)
        record_id = str(obj["id"])
        if record_id in seen:
            raise ManifestError(
                f"{path}:{line_no}: duplicate id '{record_id}' "
                f"(first seen on line {seen[record_id]})"
            )
        seen[record_id] = line_no
        reference = obj.get("reference_path")
        records.append(
            EvalRecord(
                id=record_id,
                mixture_path=base / str(obj["mixture_path"]),
                separated_path=base / str(obj["separated_path"]),
                reference_path=base / str(reference) if reference else None,
                query=_query_from(obj, path, line_no),
            )
        )
    return records


def load_pairs_manifest(path: str | Path) -> list[SweepPair]:
    """Parse a JSON-lines sweep manifest of (source, companion, query) triples."""
    path = Path(path)
    base = path.parent
    pairs: list[SweepPair] = []
    seen: dict[str, int] = {}
    for line_no, obj in _parse_lines(path):
        _require_fields(obj, ("id", "source_path", "query"), path, line_no)
        pair_id = str(obj["id"])
        if pair_id in seen:
            raise ManifestError(
                f"{path}:{line_no}: duplicate id '{pair_id}' "
                f"(first seen on line {seen[pair_id]})"
            )
        seen[pair_id] = line_no
        companion = obj.get("companion_path")
        pairs.append(
            SweepPair(
                id=pair_id,
                source_path=base / str(obj["source_path"]),
                companion_path=base / str(companion) if companion else None,
                query=_query_from(obj, path, line_no),
            )
        )
    return pairs


def _load_mono(path: Path) -> AudioClip:
    return to_mono(read_wav(path))


def evaluate_record(record: EvalRecord, backend: EmbeddingBackend, metrics) -> dict:
    """Compute the requested metrics for one record.

    Reference-requiring metrics are skipped (not errored) when the record
    has no reference_path; any hard failure marks the whole record failed
    while keeping its row in the report.
    """
    requested = list(metrics)
    unknown = [m for m in requested if m not in METRIC_NAMES]
    if unknown:
        raise MetricInputError(f"unknown metrics requested: {unknown}")
    entries: dict[str, dict] = {}
    try:
        separated = _load_mono(record.separated_path)
        mixture = None
        if _NEEDS_MIXTURE & set(requested):
            mixture = _load_mono(record.mixture_path)
        reference = None
        if _NEEDS_REFERENCE & set(requested) and record.reference_path is not None:
            reference = _load_mono(record.reference_path)

        for name in requested:
            if name in _NEEDS_REFERENCE and reference is None:
                entries[name] = {"skipped": SKIP_NO_REFERENCE}

        if reference is not None:
            if "sdr" in requested:
                pair = align_lengths(reference, separated)
                entries["sdr"] = {"value": sdr(pair.reference, pair.estimate)}
            if "sisdr" in requested:
                pair = align_lengths(reference, separated)
                entries["sisdr"] = {"value": si_sdr(pair.reference, pair.estimate).value_db}
            if "sdri" in requested:
                pair_est = align_lengths(reference, separated)
                pair_mix = align_lengths(reference, mixture)
                n = min(pair_est.reference.size, pair_mix.reference.size)
                after = sdr(pair_est.reference[:n], pair_est.estimate[:n])
                before = sdr(pair_mix.reference[:n], pair_mix.estimate[:n])
                entries["sdri"] = {"value": after - before}

        if _CLAP_AFTER & set(requested):
            text_emb = backend.embed_text(record.query)
            after_score = clapscore(backend.embed_audio(separated), text_emb)
            if "clapscore" in requested:
                entries["clapscore"] = {"value": after_score}
            if "clapscore_i" in requested:
                before_score = clapscore(backend.embed_audio(mixture), text_emb)
                entries["clapscore_i"] = {"value": after_score - before_score}
            if "ref_clapscore" in requested and reference is not None:
                ref_score = clapscore(backend.embed_audio(reference), text_emb)
                value, flags = ref_clapscore(after_score, ref_score)
                entry: dict = {"value": value}
                if flags:
                    entry["flags"] = sorted(flags)
                entries["ref_clapscore"] = entry
    except (LassEvalError, OSError) as exc:
        return {
            "id": record.id,
            "error": str(exc),
            "metrics": {name: {"skipped": SKIP_RECORD_ERROR} for name in requested},
        }
    return {"id": record.id, "metrics": entries}


def evaluate_manifest(
    records: list[EvalRecord],
    backend: EmbeddingBackend,
    metrics,
    workers: int = 1,
) -> tuple[dict, int]:
    """Evaluate every record and assemble the report; returns (report, failed)."""
    requested = list(metrics)
    if workers <= 1:
        results = [evaluate_record(r, backend, requested) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: evaluate_record(r, backend, requested), records))
    results.sort(key=lambda entry: entry["id"])

    aggregates: dict[str, dict] = {}
    for name in requested:
        values = [
            entry["metrics"][name]["value"]
            for entry in results
            if "value" in entry["metrics"].get(name, {})
            and not entry["metrics"][name].get("flags")
        ]
        excluded = len(results) - len(values)
        if values:
            summary = aggregate(values)
            aggregates[name] = {
                "mean": summary.mean,
                "stddev": summary.stddev,
                "count": summary.count,
                "min": summary.min,
                "max": summary.max,
                "excluded": excluded,
            }
        else:
            aggregates[name] = {"count": 0, "excluded": excluded}

    report = {
        "tool_version": __version__,
        "metrics_requested": requested,
        "backend": backend.describe(),
        "per_record": results,
        "aggregates": aggregates,
    }
    failed = sum(1 for entry in results if "error" in entry)
    return report, failed


def dump_report(report: dict, path: str | Path) -> None:
    """Serialize a report deterministically (sorted keys, fixed layout)."""
    Path(path).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def correlate_report(report: dict, x_metric: str, y_metric: str) -> tuple[CorrelationResult, int]:
    """Pearson r and p over records where both metrics have clean values.

    Skipped or flagged records are excluded; the exclusion count is
    returned alongside the result.
    """
    for name in (x_metric, y_metric):
        if name not in report.get("metrics_requested", []):
            raise MetricInputError(f"metric {name!r} is not present in the report")
    xs: list[float] = []
    ys: list[float] = []
    total = 0
    for entry in report["per_record"]:
        total += 1
        mx = entry["metrics"].get(x_metric, {})
        my = entry["metrics"].get(y_metric, {})
        if "value" in mx and "value" in my and not mx.get("flags") and not my.get("flags"):
            xs.append(mx["value"])
            ys.append(my["value"])
    excluded = total - len(xs)
    if len(xs) < 3:
        raise MetricInputError(
            f"need at least 3 shared records for correlation, got {len(xs)}"
        )
    r = pearson(xs, ys)
    result = CorrelationResult(
        r=r, n=len(xs), t_stat=t_statistic(r, len(xs)), p_value=pearson_p_value(r, len(xs))
    )
    return result, excluded


def _format_level(level_db: float) -> str:
    return f"{level_db:g}"


def run_sweep(
    pairs: list[SweepPair],
    grid: SdrLevelGrid,
    strategies,
    backend: EmbeddingBackend,
    out_dir: str | Path,
    base_seed: int = 0,
) -> list[tuple[str, float, str, float]]:
    """Generate pair x strategy x level mixtures and score each one.

    Writes per-mixture WAVs plus a JSONL index of their mix plans, a CSV of
    every (strategy, level, id, clapscore) row, and a per-(strategy, level)
    mean table. Row order is manifest order x strategy order x ascending
    level, so output bytes are reproducible for a fixed seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    strategies = list(strategies)

    rows: list[tuple[str, float, str, float]] = []
    index_lines: list[str] = []
    for pair in pairs:
        source = _load_mono(pair.source_path)
        companion = None
        if STRATEGY_OTHER_CONTENT in strategies:
            if pair.companion_path is None:
                raise ManifestError(
                    f"pair '{pair.id}' has no companion_path but strategy "
                    f"{STRATEGY_OTHER_CONTENT} was requested"
                )
            companion = _load_mono(pair.companion_path)
        text_emb = backend.embed_text(pair.query)
        seed = derive_seed(base_seed, pair.id)
        for strategy in strategies:
            for level_db in grid.levels:
                mixture, plan = build_strategy_mixture(source, strategy, companion, level_db, seed)
                name = f"{pair.id}__{strategy}__{_format_level(level_db)}dB.wav"
                write_wav(mixture, out_dir / name, "float32")
                index_lines.append(
                    json.dumps({"file": name, "id": pair.id} | plan.to_json_dict(), sort_keys=True)
                )
                score = clapscore(backend.embed_audio(mixture), text_emb)
                rows.append((strategy, float(level_db), pair.id, score))

    (out_dir / "index.jsonl").write_text("\n".join(index_lines) + "\n", encoding="utf-8")

    with open(out_dir / "clapscores.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["strategy", "level_db", "id", "clapscore"])
        for strategy, level_db, pair_id, score in rows:
            writer.writerow([strategy, _format_level(level_db), pair_id, repr(score)])

    with open(out_dir / "means.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["strategy", "level_db", "mean_clapscore", "count"])
        for strategy in strategies:
            for level_db in grid.levels:
                cell = [s for st, lv, _, s in rows if st == strategy and lv == level_db]
                if cell:
                    writer.writerow(
                        [strategy, _format_level(level_db), repr(sum(cell) / len(cell)), len(cell)]
                    )

    return rows


def precompute_embeddings(
    records: list[EvalRecord],
    backend: EmbeddingBackend,
    cache_dir: str | Path,
    workers: int = 1,
) -> tuple[int, int, list[tuple[str, str]]]:
    """Embed every audio file and query of a manifest into a cache.

    Idempotent: items whose content key already exists are skipped without
    touching the service. Returns (written, skipped, failures) where each
    failure is (item label, error message).
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    audio_items: dict[str, Path] = {}
    text_items: dict[str, TextQuery] = {}
    for record in records:
        paths = [record.mixture_path, record.separated_path]
        if record.reference_path is not None:
            paths.append(record.reference_path)
        for path in paths:
            audio_items.setdefault(str(path), path)
        text_items.setdefault(record.query.text.strip(), record.query)

    def embed_audio_item(path: Path) -> int:
        clip = _load_mono(path)
        key = cache_key(MODALITY_AUDIO, audio_payload(clip))
        if (cache_dir / f"{key}.emb.json").exists():
            return 0
        cache_put(cache_dir, key, backend.embed_audio(clip))
        return 1

    def embed_text_item(query: TextQuery) -> int:
        key = cache_key(MODALITY_TEXT, text_payload(query))
        if (cache_dir / f"{key}.emb.json").exists():
            return 0
        cache_put(cache_dir, key, backend.embed_text(query))
        return 1

    jobs: list[tuple[str, object]] = [("audio " + label, path) for label, path in sorted(audio_items.items())]
    jobs += [("text " + label, query) for label, query in sorted(text_items.items())]

    def run_job(job: tuple[str, object]):
        label, item = job
        try:
            if label.startswith("audio "):
                return label, embed_audio_item(item), None
            return label, embed_text_item(item), None
        except (LassEvalError, OSError) as exc:
            return label, 0, str(exc)

    if workers <= 1:
        outcomes = [run_job(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_job, jobs))

    written = sum(count for _, count, err in outcomes if err is None)
    failures = [(label, err) for label, _, err in outcomes if err is not None]
    skipped = sum(1 for _, count, err in outcomes if err is None and count == 0)
    return written, skipped, failures
