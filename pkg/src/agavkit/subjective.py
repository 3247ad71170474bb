"""Subjective rating pipeline: raw ratings to normalized MOS and reliability.

Ratings arrive as one record per (subject, item) on a 1-5 scale with 0.1
steps. Per-subject z-scoring removes rater bias, a linear map spreads the
result over 0-100, and per-item means become MOS values. Reliability checks
(Krippendorff's alpha, split-half correlation, per-category spread) operate
on the same matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .metrics import srcc

DIMENSIONS = ("audio_quality", "consistency", "overall")

SCORE_MIN = 1.0
SCORE_MAX = 5.0
SCORE_STEP = 0.1


class MissingRatingsError(ValueError):
    """An item has no usable ratings for some dimension."""


def score_on_grid(value: float) -> bool:
    """True when value lies in [1, 5] on the 0.1 grid (within float noise)."""
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        return False
    v = float(value)
    if not math.isfinite(v) or v < SCORE_MIN or v > SCORE_MAX:
        return False
    return abs(v * 10.0 - round(v * 10.0)) < 1e-6


def validate_score(value: float, name: str = "score") -> float:
    if not score_on_grid(value):
        raise ValueError(f"{name} must be in [1, 5] with 0.1 steps, got {value!r}")
    return float(value)


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC 3339 timestamp, accepting the trailing-Z form."""
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(t)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}: {exc}") from None
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    return dt


def format_rfc3339(dt: datetime) -> str:
    if dt.tzinfo is None:
        raise ValueError("naive datetime cannot be formatted as RFC 3339")
    utc = dt.astimezone(timezone.utc)
    spec = "microseconds" if utc.microsecond else "seconds"
    return utc.isoformat(timespec=spec).replace("+00:00", "Z")


@dataclass(frozen=True)
class RatingRecord:
    """One subject's scores for one item across the three dimensions."""

    subject_id: str
    item_id: str
    audio_quality: float
    consistency: float
    overall: float
    timestamp: datetime

    def __post_init__(self):
        if not self.subject_id or not self.item_id:
            raise ValueError("subject_id and item_id must be non-empty")
        for dim in DIMENSIONS:
            validate_score(getattr(self, dim), dim)
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must carry a UTC offset")

    def score(self, dimension: str) -> float:
        if dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension: {dimension!r}")
        return getattr(self, dimension)

    def to_json_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "item_id": self.item_id,
            "audio_quality": self.audio_quality,
            "consistency": self.consistency,
            "overall": self.overall,
            "timestamp": format_rfc3339(self.timestamp),
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "RatingRecord":
        try:
            return cls(
                subject_id=str(raw["subject_id"]),
                item_id=str(raw["item_id"]),
                audio_quality=float(raw["audio_quality"]),
                consistency=float(raw["consistency"]),
                overall=float(raw["overall"]),
                timestamp=parse_rfc3339(raw["timestamp"]),
            )
        except KeyError as exc:
            raise ValueError(f"rating record missing key {exc}") from None


def dedupe_latest(records: Iterable[RatingRecord]) -> list[RatingRecord]:
    """Collapse duplicate (subject, item) pairs, keeping the latest rating.

    Later stream position breaks timestamp ties, so replaying an append-only
    log yields the final revision.
    """
    best: dict[tuple[str, str], RatingRecord] = {}
    for rec in records:
        key = (rec.subject_id, rec.item_id)
        cur = best.get(key)
        if cur is None or rec.timestamp >= cur.timestamp:
            best[key] = rec
    return list(best.values())


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Subjects-by-items grids, one per dimension, NaN for missing cells."""

    subjects: tuple[str, ...]
    items: tuple[str, ...]
    grids: dict

    def grid(self, dimension: str) -> np.ndarray:
        if dimension not in self.grids:
            raise ValueError(f"unknown dimension: {dimension!r}")
        return self.grids[dimension]


def build_matrix(records: Iterable[RatingRecord]) -> RatingMatrix:
    """Arrange deduplicated ratings into aligned grids, sorted ids on both axes."""
    deduped = dedupe_latest(records)
    if not deduped:
        raise ValueError("no ratings")
    subjects = tuple(sorted({r.subject_id for r in deduped}))
    items = tuple(sorted({r.item_id for r in deduped}))
    srow = {s: i for i, s in enumerate(subjects)}
    icol = {t: j for j, t in enumerate(items)}
    grids = {
        dim: np.full((len(subjects), len(items)), np.nan) for dim in DIMENSIONS
    }
    for rec in deduped:
        i, j = srow[rec.subject_id], icol[rec.item_id]
        for dim in DIMENSIONS:
            grids[dim][i, j] = getattr(rec, dim)
    return RatingMatrix(subjects, items, grids)


@dataclass(frozen=True)
class SubjectExclusion:
    subject_id: str
    dimension: str
    reason: str


@dataclass(frozen=True, eq=False)
class NormalizationResult:
    matrix: RatingMatrix
    exclusions: tuple[SubjectExclusion, ...]


def zscore_normalize(matrix: RatingMatrix) -> NormalizationResult:
    """Per-subject z-score each dimension, then map z=-3..3 onto 0..100.

    Values are clipped into [0, 100]. A subject contributes nothing to a
    dimension when they rated fewer than two items or gave every item the
    same score; such rows are blanked and reported as exclusions.
    """
    grids = {}
    exclusions: list[SubjectExclusion] = []
    for dim in DIMENSIONS:
        src = matrix.grid(dim)
        out = np.full_like(src, np.nan)
        for i, subject in enumerate(matrix.subjects):
            row = src[i]
            present = ~np.isnan(row)
            count = int(present.sum())
            if count < 2:
                exclusions.append(
                    SubjectExclusion(subject, dim, "fewer than two ratings")
                )
                continue
            vals = row[present]
            mu = float(vals.mean())
            sigma = float(vals.std(ddof=1))
            if sigma == 0.0:
                exclusions.append(SubjectExclusion(subject, dim, "zero variance"))
                continue
            z = (vals - mu) / sigma
            out[i, present] = np.clip(100.0 * (z + 3.0) / 6.0, 0.0, 100.0)
        grids[dim] = out
    return NormalizationResult(
        RatingMatrix(matrix.subjects, matrix.items, grids), tuple(exclusions)
    )


@dataclass(frozen=True)
class MosRecord:
    """Per-item mean opinion scores on the 0-100 scale."""

    item_id: str
    audio_quality: float
    consistency: float
    overall: float
    rater_count: int
    std_overall: float

    def score(self, dimension: str) -> float:
        if dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension: {dimension!r}")
        return getattr(self, dimension)

    def to_json_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "audio_quality": self.audio_quality,
            "consistency": self.consistency,
            "overall": self.overall,
            "rater_count": self.rater_count,
            "std_overall": self.std_overall,
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "MosRecord":
        try:
            return cls(
                item_id=str(raw["item_id"]),
                audio_quality=float(raw["audio_quality"]),
                consistency=float(raw["consistency"]),
                overall=float(raw["overall"]),
                rater_count=int(raw["rater_count"]),
                std_overall=float(raw["std_overall"]),
            )
        except KeyError as exc:
            raise ValueError(f"MOS record missing key {exc}") from None


def compute_mos(matrix: RatingMatrix) -> list[MosRecord]:
    """Average each item over subjects, per dimension, in item order.

    rater_count and std_overall come from the overall dimension; an item
    with a single rater gets std_overall 0.
    """
    records = []
    for j, item in enumerate(matrix.items):
        means = {}
        for dim in DIMENSIONS:
            col = matrix.grid(dim)[:, j]
            vals = col[~np.isnan(col)]
            if vals.size == 0:
                raise MissingRatingsError(f"item {item!r} has no ratings for {dim}")
            means[dim] = float(vals.mean())
        overall_col = matrix.grid("overall")[:, j]
        overall_vals = overall_col[~np.isnan(overall_col)]
        std = float(overall_vals.std(ddof=1)) if overall_vals.size > 1 else 0.0
        records.append(
            MosRecord(
                item_id=item,
                audio_quality=means["audio_quality"],
                consistency=means["consistency"],
                overall=means["overall"],
                rater_count=int(overall_vals.size),
                std_overall=std,
            )
        )
    return records


def krippendorff_alpha(values) -> float:
    """Interval-metric Krippendorff's alpha for a raters-by-items grid.

    Missing cells are NaN. Items rated by fewer than two raters cannot be
    paired and drop out. Zero expected disagreement (all pooled values
    identical) is defined as perfect agreement.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("need at least two raters")
    units = []
    for j in range(arr.shape[1]):
        col = arr[:, j]
        present = col[~np.isnan(col)]
        if present.size >= 2:
            units.append(present)
    if not units:
        raise ValueError("no item has two or more ratings")
    n = sum(u.size for u in units)
    observed = 0.0
    for u in units:
        diffs = u[:, None] - u[None, :]
        observed += float((diffs * diffs).sum()) / (u.size - 1)
    observed /= n
    if observed == 0.0:
        return 1.0
    pooled = np.concatenate(units)
    expected = 2.0 * n * float(np.var(pooled)) / (n - 1)
    if expected == 0.0:
        return 1.0
    return 1.0 - observed / expected


@dataclass(frozen=True)
class SplitHalfResult:
    mean: float
    per_repetition: tuple[float, ...]


def split_half_srcc(values, repetitions: int = 10, seed: int = 0) -> SplitHalfResult:
    """Correlation between item means of two random halves of the raters.

    Raters are split floor(n/2) / ceil(n/2) fresh for each repetition; items
    lacking ratings in either half are skipped for that repetition.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {arr.shape}")
    n_subjects = arr.shape[0]
    if n_subjects < 2:
        raise ValueError("need at least two raters to split")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    rng = np.random.default_rng(seed)
    per_rep = []
    for _ in range(repetitions):
        perm = rng.permutation(n_subjects)
        half_a = arr[perm[: n_subjects // 2]]
        half_b = arr[perm[n_subjects // 2 :]]
        rho = _half_means_srcc(half_a, half_b)
        per_rep.append(rho)
    return SplitHalfResult(float(np.mean(per_rep)), tuple(per_rep))


def _half_means_srcc(half_a: np.ndarray, half_b: np.ndarray) -> float:
    counts_a = (~np.isnan(half_a)).sum(axis=0)
    counts_b = (~np.isnan(half_b)).sum(axis=0)
    keep = (counts_a > 0) & (counts_b > 0)
    if int(keep.sum()) < 2:
        raise ValueError("fewer than two items rated in both halves")
    means_a = np.nansum(half_a[:, keep], axis=0) / counts_a[keep]
    means_b = np.nansum(half_b[:, keep], axis=0) / counts_b[keep]
    return srcc(means_a, means_b)


def per_category_std(
    mos_records: Iterable[MosRecord], categories: Mapping[str, str]
) -> dict[str, float]:
    """Mean per-item rating spread (std_overall) grouped by item category."""
    buckets: dict[str, list[float]] = {}
    for rec in mos_records:
        if rec.item_id not in categories:
            raise ValueError(f"item {rec.item_id!r} has no category")
        buckets.setdefault(categories[rec.item_id], []).append(rec.std_overall)
    return {cat: float(np.mean(vals)) for cat, vals in sorted(buckets.items())}


def inter_dimension_srcc(mos_records: Iterable[MosRecord]) -> dict[str, dict[str, float]]:
    """SRCC between every pair of MOS dimensions; diagonal pinned to 1."""
    records = list(mos_records)
    if len(records) < 2:
        raise ValueError("need at least two items")
    columns = {dim: [rec.score(dim) for rec in records] for dim in DIMENSIONS}
    table: dict[str, dict[str, float]] = {}
    for a in DIMENSIONS:
        table[a] = {}
        for b in DIMENSIONS:
            table[a][b] = 1.0 if a == b else srcc(columns[a], columns[b])
    return table


def read_ratings_jsonl(path) -> list[RatingRecord]:
    return _read_jsonl(path, RatingRecord.from_json_dict)


def write_ratings_jsonl(path, records: Iterable[RatingRecord]) -> None:
    _write_jsonl(path, (r.to_json_dict() for r in records))


def read_mos_jsonl(path) -> list[MosRecord]:
    return _read_jsonl(path, MosRecord.from_json_dict)


def write_mos_jsonl(path, records: Iterable[MosRecord]) -> None:
    _write_jsonl(path, (r.to_json_dict() for r in records))


def _read_jsonl(path, parse):
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(parse(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def _write_jsonl(path, dicts) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dicts:
            fh.write(json.dumps(d, sort_keys=True) + "\n")
