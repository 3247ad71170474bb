"""Evaluation harness: grouped k-fold scoring and pair-selection protocols.

Scoring evaluation correlates backend predictions with ground-truth MOS
under cross-validation that never splits one source video across folds.
Pair evaluation measures whether a backend can pick the correct audio for a
video, either by answering a multi-candidate question directly or by
scoring candidates one at a time and taking the argmax.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .backends import (
    BackendError,
    CapabilityError,
    ProtocolViolationError,
    ScoringBackend,
)
from .seeding import item_rng
from .manifests import AgavItem, PairGroup
from .metrics import ascending_level_score, krcc, plcc, rmse, srcc
from .subjective import DIMENSIONS

# A report whose failure share exceeds this is marked invalid.
MAX_FAILURE_SHARE = 0.10


@dataclass(frozen=True)
class DimensionMetrics:
    srcc: float
    krcc: float
    plcc: float
    rmse: float

    def to_json_dict(self) -> dict:
        return {"srcc": self.srcc, "krcc": self.krcc, "plcc": self.plcc, "rmse": self.rmse}


@dataclass(frozen=True, eq=False)
class MetricReport:
    k: int
    seed: int
    items_total: int
    items_scored: int
    items_failed: int
    valid: bool
    per_fold: tuple
    fold_mean: dict
    pooled: dict
    failures: tuple

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "items_total": self.items_total,
            "items_scored": self.items_scored,
            "items_failed": self.items_failed,
            "valid": self.valid,
            "per_fold": [
                {dim: m.to_json_dict() for dim, m in fold.items()} for fold in self.per_fold
            ],
            "fold_mean": {dim: m.to_json_dict() for dim, m in self.fold_mean.items()},
            "pooled": {dim: m.to_json_dict() for dim, m in self.pooled.items()},
            "failures": [list(f) for f in self.failures],
        }


def kfold_split(items: list[AgavItem], k: int, seed: int) -> list[list[AgavItem]]:
    """Partition items into k folds without splitting any source video.

    Videos are shuffled by seed and dealt into folds whose video counts
    differ by at most one (earlier folds take the remainder).
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    for item in items:
        if not item.source_video_id:
            raise ValueError(f"item {item.id!r} lacks a source video id")
    videos = list(dict.fromkeys(it.source_video_id for it in items))
    if len(videos) < k:
        raise ValueError(f"cannot make {k} folds from {len(videos)} source videos")
    order = np.random.default_rng(seed).permutation(len(videos))
    shuffled = [videos[i] for i in order]
    base, extra = divmod(len(videos), k)
    folds: list[list[AgavItem]] = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        fold_videos = set(shuffled[start : start + size])
        start += size
        folds.append([it for it in items if it.source_video_id in fold_videos])
    return folds


def _predict_overall_fn(backend: ScoringBackend):
    caps = backend.capabilities
    if caps.triple:
        return lambda item: backend.score(item).overall
    if caps.levels:
        return lambda item: ascending_level_score(backend.level_logits(item, "overall"))
    raise CapabilityError(
        f"{backend.name} supports neither triple scores nor level logits"
    )


def _predict_triple_fn(backend: ScoringBackend):
    caps = backend.capabilities
    if caps.triple:
        def predict(item):
            triple = backend.score(item)
            return {dim: triple.score(dim) for dim in DIMENSIONS}

        return predict
    if caps.levels:
        def predict(item):
            return {
                dim: ascending_level_score(backend.level_logits(item, dim))
                for dim in DIMENSIONS
            }

        return predict
    raise CapabilityError(
        f"{backend.name} supports neither triple scores nor level logits"
    )


def _gather(fn, items, workers: int):
    """Apply fn to items, keyed by id; failures land in a second dict."""
    results: dict = {}
    failures: dict = {}

    def run_one(item):
        try:
            return item.id, fn(item), None
        except CapabilityError:
            raise
        except BackendError as exc:
            return item.id, None, f"{type(exc).__name__}: {exc}"

    if workers <= 1:
        outcomes = map(run_one, items)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, items))
    for item_id, value, error in outcomes:
        if error is None:
            results[item_id] = value
        else:
            failures[item_id] = error
    return results, failures


def _dimension_metrics(pairs: list[tuple[dict, dict]]) -> dict:
    out = {}
    for dim in DIMENSIONS:
        pred = [p[dim] for p, _ in pairs]
        truth = [t[dim] for _, t in pairs]
        out[dim] = DimensionMetrics(
            srcc=srcc(pred, truth),
            krcc=krcc(pred, truth),
            plcc=plcc(pred, truth),
            rmse=rmse(pred, truth),
        )
    return out


def evaluate_scoring(
    backend: ScoringBackend,
    items: list[AgavItem],
    k: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> MetricReport:
    """Correlate backend predictions with ground truth under grouped k-fold CV.

    Items whose backend call fails are dropped and tallied; when more than
    a tenth of the manifest fails the report is flagged invalid.
    """
    for item in items:
        if item.ground_truth is None:
            raise ValueError(f"item {item.id!r} carries no ground truth")
    folds = kfold_split(items, k, seed)
    predict = _predict_triple_fn(backend)
    predictions, failures = _gather(predict, items, workers)

    truth = {
        it.id: {dim: it.ground_truth.score(dim) for dim in DIMENSIONS} for it in items
    }
    per_fold = []
    for index, fold in enumerate(folds):
        scored = [(predictions[it.id], truth[it.id]) for it in fold if it.id in predictions]
        if len(scored) < 2:
            raise ValueError(f"fold {index} has fewer than two scored items")
        per_fold.append(_dimension_metrics(scored))

    fold_mean = {}
    for dim in DIMENSIONS:
        fold_mean[dim] = DimensionMetrics(
            srcc=float(np.mean([f[dim].srcc for f in per_fold])),
            krcc=float(np.mean([f[dim].krcc for f in per_fold])),
            plcc=float(np.mean([f[dim].plcc for f in per_fold])),
            rmse=float(np.mean([f[dim].rmse for f in per_fold])),
        )
    pooled_pairs = [(predictions[it.id], truth[it.id]) for it in items if it.id in predictions]
    pooled = _dimension_metrics(pooled_pairs)

    failed = len(failures)
    return MetricReport(
        k=k,
        seed=seed,
        items_total=len(items),
        items_scored=len(predictions),
        items_failed=failed,
        valid=failed <= MAX_FAILURE_SHARE * len(items),
        per_fold=tuple(per_fold),
        fold_mean=fold_mean,
        pooled=pooled,
        failures=tuple(sorted(failures.items())),
    )


def pair_instruction(n_audios: int) -> str:
    """The multi-candidate question shown to a choice backend."""
    if n_audios < 2:
        raise ValueError("a pair question needs at least two audios")
    listed = ", ".join(f"Audio {i} is <audio {i}>" for i in range(1, n_audios + 1))
    return (
        f"The video is <video>, {listed}."
        " Which audio best matches this video in terms of audio content,"
        " quality, and rhythm?"
    )


@dataclass(frozen=True)
class PairQuestion:
    """One presentation of a group with the correct audio at a set position."""

    group_id: str
    source_page: str
    video_uri: str
    presented_audio_uris: tuple
    correct_position: int
    instruction: str


def build_pair_questions(groups: list[PairGroup], seed: int) -> list[PairQuestion]:
    """Expand each group into one question per candidate position.

    Question j places the correct audio at position j; the remaining
    candidates fill the other positions in seeded shuffled order, so every
    position hosts the correct answer exactly once per group.
    """
    questions = []
    for group in groups:
        n = len(group.items)
        others = [it.audio_uri for it in group.items if it.id != group.correct_item_id]
        correct_uri = group.correct_item.audio_uri
        for position in range(1, n + 1):
            rest = list(others)
            item_rng(seed, f"pair:{group.group_id}:{position}").shuffle(rest)
            presented = rest[: position - 1] + [correct_uri] + rest[position - 1 :]
            questions.append(
                PairQuestion(
                    group_id=group.group_id,
                    source_page=group.source_page,
                    video_uri=group.video_uri,
                    presented_audio_uris=tuple(presented),
                    correct_position=position,
                    instruction=pair_instruction(n),
                )
            )
    return questions


@dataclass(frozen=True, eq=False)
class PairReport:
    """Accuracy of audio selection, split by protocol and source page.

    ``overall`` counts every question equally; ``group_mean_accuracy``
    averages per-group accuracies so each group weighs the same regardless
    of its candidate count.
    """

    protocol: str
    questions_total: int
    correct_total: int
    overall: float
    group_mean_accuracy: float
    per_page: dict
    per_page_counts: dict
    violations: int
    failures: int
    ties: int

    def to_json_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "questions_total": self.questions_total,
            "correct_total": self.correct_total,
            "overall": self.overall,
            "group_mean_accuracy": self.group_mean_accuracy,
            "per_page": dict(self.per_page),
            "per_page_counts": dict(self.per_page_counts),
            "violations": self.violations,
            "failures": self.failures,
            "ties": self.ties,
        }


def _tally_pair_outcomes(outcomes) -> PairReport:
    """outcomes: (group_id, source_page, correct?, violation?, failure?, tie?)."""
    by_group: dict = {}
    by_page: dict = {}
    correct_total = violations = failures = ties = 0
    for group_id, page, correct, violation, failure, tie in outcomes:
        by_group.setdefault(group_id, []).append(correct)
        by_page.setdefault(page, []).append(correct)
        correct_total += correct
        violations += violation
        failures += failure
        ties += tie
    total = sum(len(v) for v in by_group.values())
    group_accuracies = [sum(v) / len(v) for v in by_group.values()]
    return PairReport(
        protocol="",
        questions_total=total,
        correct_total=correct_total,
        overall=correct_total / total,
        group_mean_accuracy=sum(group_accuracies) / len(group_accuracies),
        per_page={page: sum(v) / len(v) for page, v in sorted(by_page.items())},
        per_page_counts={page: len(v) for page, v in sorted(by_page.items())},
        violations=violations,
        failures=failures,
        ties=ties,
    )


def evaluate_pair_multi_input(
    backend: ScoringBackend, questions: list[PairQuestion], workers: int = 1
) -> PairReport:
    """Ask every question directly; wrong, violating, or failing answers miss.

    An answer outside the presented range counts as a protocol violation
    and therefore as incorrect, never as a crash.
    """
    if not questions:
        raise ValueError("no questions to evaluate")
    if not backend.capabilities.choice:
        raise CapabilityError(f"{backend.name} does not answer multi-input choices")

    def ask(question: PairQuestion):
        n = len(question.presented_audio_uris)
        try:
            answer = backend.choose(question.video_uri, list(question.presented_audio_uris))
        except ProtocolViolationError:
            return question, False, True, False
        except CapabilityError:
            raise
        except BackendError:
            return question, False, False, True
        if answer.selected_index > n:
            return question, False, True, False
        return question, answer.selected_index == question.correct_position, False, False

    if workers <= 1:
        results = [ask(q) for q in questions]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(ask, questions))
    outcomes = [
        (q.group_id, q.source_page, correct, violation, failure, False)
        for q, correct, violation, failure in results
    ]
    return replace(_tally_pair_outcomes(outcomes), protocol="multi-input")


def evaluate_pair_single_input(
    backend: ScoringBackend, groups: list[PairGroup], workers: int = 1
) -> PairReport:
    """Score candidates independently and pick the best overall score.

    Ties go to the earliest item in manifest order and are tallied. Items
    whose call fails are skipped; a group with no scored candidate counts
    as incorrect.
    """
    if not groups:
        raise ValueError("no groups to evaluate")
    predict = _predict_overall_fn(backend)

    def judge(group: PairGroup):
        scores = []
        failed = 0
        for item in group.items:
            try:
                scores.append((item.id, predict(item)))
            except CapabilityError:
                raise
            except BackendError:
                failed += 1
        if not scores:
            return group, False, failed, False
        best = max(s for _, s in scores)
        winners = [item_id for item_id, s in scores if s == best]
        tie = len(winners) > 1
        return group, winners[0] == group.correct_item_id, failed, tie

    if workers <= 1:
        results = [judge(g) for g in groups]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(judge, groups))
    outcomes = [
        (g.group_id, g.source_page, correct, False, failed, tie)
        for g, correct, failed, tie in results
    ]
    return replace(_tally_pair_outcomes(outcomes), protocol="single-input")


def random_baseline(groups: list[PairGroup]) -> float:
    """Expected group-mean accuracy of a uniform guesser: mean of 1/n."""
    if not groups:
        raise ValueError("no groups")
    shares = [1.0 / len(g.items) for g in groups]
    return sum(shares) / len(shares)
