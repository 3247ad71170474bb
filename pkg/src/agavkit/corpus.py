"""Instruction-pair corpus synthesis for audio-visual quality tuning.

Source items (generated clips plus their prompt captions) are turned into
instruction/response pairs across three scenarios: audio paired with video,
audio paired with a text caption, and music paired with a text caption.
Degraded variants are manufactured on purpose: reversing an audio track
ruins its quality, swapping in a foreign audio clip or an unrelated caption
ruins content consistency. Labels stay balanced by construction.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .audio import read_wav, reverse_audio, write_wav
from .metrics import QUALITY_LEVELS
from .seeding import item_rng

SCENARIOS = ("audio-video", "audio-text", "music-text")

LABEL_GOOD = "excellent"
LABEL_BAD = "bad"

PROVENANCE_ORIGINAL = "original"
PROVENANCE_AUDIO_SWAPPED = "audio-swapped"
PROVENANCE_CAPTION_SWAPPED = "caption-swapped"
PROVENANCE_AUDIO_REVERSED = "audio-reversed"

# Dimensions a template can ask about. The corpus itself only emits the two
# single-dimension forms; "all_dimensions" covers the combined question.
TEMPLATE_DIMENSIONS = ("audio_quality", "consistency", "all_dimensions")

MASK_TOKEN = "[Mask]"

STOP_WORDS_VERSION = 1
STOP_WORDS = frozenset(
    """
    a about above after again against all am an and any are aren as at be
    because been before being below between both but by can cannot could
    couldn did didn do does doesn doing don down during each few for from
    further had hadn has hasn have haven having he her here hers herself him
    himself his how i if in into is isn it its itself just ll m me might
    mightn more most must mustn my myself no nor not now o of off on once
    only or other our ours ourselves out over own re s same shan she should
    shouldn so some such t than that the their theirs them themselves then
    there these they this those through to too under until up ve very was
    wasn we were weren what when where which while who whom why will with
    won would wouldn you your yours yourself yourselves
    """.split()
)


class CorpusShortfallError(ValueError):
    """Not enough usable source items to hit the requested pair counts."""


def content_tokens(caption: str) -> frozenset[str]:
    """Lowercased alphanumeric tokens of a caption, minus stop words."""
    tokens = re.findall(r"[a-z0-9]+", caption.lower())
    return frozenset(t for t in tokens if t not in STOP_WORDS)


def captions_overlap(a: str, b: str) -> bool:
    """True when two captions share at least one content token."""
    return bool(content_tokens(a) & content_tokens(b))


@dataclass(frozen=True)
class SourceItem:
    """One generated clip with the metadata needed to build pairs from it."""

    id: str
    scenario: str
    category: str
    audio_path: str
    video_path: str | None = None
    caption: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("item id must be non-empty")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario: {self.scenario!r}")
        if not self.audio_path:
            raise ValueError(f"item {self.id!r} lacks an audio path")
        if self.scenario == "audio-video" and not self.video_path:
            raise ValueError(f"audio-video item {self.id!r} lacks a video path")
        if self.scenario in ("audio-text", "music-text") and not self.caption:
            raise ValueError(f"{self.scenario} item {self.id!r} lacks a caption")

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "scenario": self.scenario,
            "category": self.category,
            "audio_path": self.audio_path,
            "video_path": self.video_path,
            "caption": self.caption,
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "SourceItem":
        try:
            return cls(
                id=str(raw["id"]),
                scenario=str(raw["scenario"]),
                category=str(raw["category"]),
                audio_path=str(raw["audio_path"]),
                video_path=raw.get("video_path"),
                caption=raw.get("caption"),
            )
        except KeyError as exc:
            raise ValueError(f"source item missing key {exc}") from None


@dataclass(frozen=True)
class InstructionPair:
    """One training pair plus the media provenance behind its label."""

    scenario: str
    dimension: str
    instruction: str
    response: str
    label: str
    provenance: str
    audio_path: str
    video_path: str | None
    caption: str | None

    def to_json_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "dimension": self.dimension,
            "instruction": self.instruction,
            "response": self.response,
            "label": self.label,
            "provenance": self.provenance,
            "audio_path": self.audio_path,
            "video_path": self.video_path,
            "caption": self.caption,
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "InstructionPair":
        try:
            return cls(
                scenario=str(raw["scenario"]),
                dimension=str(raw["dimension"]),
                instruction=str(raw["instruction"]),
                response=str(raw["response"]),
                label=str(raw["label"]),
                provenance=str(raw["provenance"]),
                audio_path=str(raw["audio_path"]),
                video_path=raw.get("video_path"),
                caption=raw.get("caption"),
            )
        except KeyError as exc:
            raise ValueError(f"instruction pair missing key {exc}") from None


class InstructionTemplate(NamedTuple):
    instruction: str
    response: str


# (scenario, dimension) -> (instruction, response format with named slots).
_TEMPLATES = {
    ("audio-video", "consistency"): (
        "<audio><video> Can you evaluate the audio-visual content consistency"
        " of the given content in one word?",
        "Audio-visual consistency: {consistency}.",
    ),
    ("audio-video", "audio_quality"): (
        "<audio><video> Can you evaluate the audio quality"
        " of the given content in one word?",
        "Audio quality: {audio_quality}.",
    ),
    ("audio-video", "all_dimensions"): (
        "<audio><video>Can you evaluate the audio quality, audio-visual content"
        " consistency, and overall audio-visual quality of the given content"
        " one by one?",
        "Audio quality: {audio_quality}, audio-visual consistency: {consistency},"
        " overall audio-visual quality: {overall}.",
    ),
    ("audio-text", "consistency"): (
        "<audio>The text is <text>. Can you evaluate the audio-text content"
        " consistency of the given content in one word?",
        "Audio-text consistency: {consistency}.",
    ),
    ("audio-text", "audio_quality"): (
        "<audio>Can you evaluate the audio quality"
        " of the given content in one word?",
        "Audio quality: {audio_quality}.",
    ),
    ("audio-text", "all_dimensions"): (
        "<audio>The text is <text>. Can you evaluate the audio quality and"
        " audio-text content consistency of the given content one by one?",
        "Audio quality: {audio_quality}, audio-text consistency: {consistency}.",
    ),
    ("music-text", "consistency"): (
        "<music>The text is <text>. Can you evaluate the music-text content"
        " consistency of the given content in one word?",
        "Music-text consistency: {consistency}.",
    ),
    ("music-text", "audio_quality"): (
        "<music>Can you evaluate the music quality"
        " of the given content in one word?",
        "Music quality: {audio_quality}.",
    ),
    ("music-text", "all_dimensions"): (
        "<music>The text is <text>. Can you evaluate the music quality and"
        " music-text content consistency of the given content one by one?",
        "Music quality: {audio_quality}, music-text consistency: {consistency}.",
    ),
}

_SLOT_PATTERN = re.compile(r"\{(\w+)\}")


def render_instruction(
    scenario: str,
    dimension: str,
    masked: bool = True,
    levels=None,
) -> InstructionTemplate:
    """Produce the instruction and response text for one template.

    With ``masked=True`` every level slot reads "[Mask]". Unmasked rendering
    needs ``levels``: a single level word for the one-dimension templates, or
    a mapping of slot name to level word for "all_dimensions".
    """
    key = (scenario, dimension)
    if key not in _TEMPLATES:
        raise ValueError(f"no template for scenario {scenario!r}, dimension {dimension!r}")
    instruction, response_format = _TEMPLATES[key]
    slots = _SLOT_PATTERN.findall(response_format)
    if masked:
        if levels is not None:
            raise ValueError("levels are only used when masked=False")
        filled = {slot: MASK_TOKEN for slot in slots}
    else:
        if levels is None:
            raise ValueError("unmasked rendering needs level words")
        if isinstance(levels, str):
            if len(slots) != 1:
                raise ValueError(f"template has {len(slots)} slots, pass a mapping")
            filled = {slots[0]: levels}
        else:
            missing = [s for s in slots if s not in levels]
            if missing:
                raise ValueError(f"missing level words for slots: {missing}")
            filled = {s: levels[s] for s in slots}
        for word in filled.values():
            if word not in QUALITY_LEVELS:
                raise ValueError(f"unknown quality level: {word!r}")
    return InstructionTemplate(instruction, response_format.format(**filled))


@dataclass(frozen=True)
class SwapSkip:
    item_id: str
    reason: str


@dataclass(frozen=True, eq=False)
class SwapResult:
    partners: dict
    skipped: tuple[SwapSkip, ...]


def swap_audio_cross_category(
    items: Iterable[SourceItem], seed: int, pool: Iterable[SourceItem] | None = None
) -> SwapResult:
    """Pair each item with a uniformly drawn pool item of another category.

    Items with no cross-category candidate are skipped and reported.
    """
    items = list(items)
    pool = items if pool is None else list(pool)
    partners: dict = {}
    skipped = []
    for item in items:
        candidates = [p for p in pool if p.category != item.category and p.id != item.id]
        if not candidates:
            skipped.append(SwapSkip(item.id, "no item of a different category"))
            continue
        rng = item_rng(seed, f"audio-swap:{item.id}")
        partners[item.id] = candidates[rng.randrange(len(candidates))].id
    return SwapResult(partners, tuple(skipped))


def swap_caption_no_overlap(
    items: Iterable[SourceItem], seed: int, pool: Iterable[SourceItem] | None = None
) -> SwapResult:
    """Pair each item with a caption sharing zero content tokens with its own."""
    items = list(items)
    pool = items if pool is None else list(pool)
    partners: dict = {}
    skipped = []
    for item in items:
        if not item.caption:
            skipped.append(SwapSkip(item.id, "item has no caption"))
            continue
        candidates = [
            p
            for p in pool
            if p.id != item.id
            and p.caption
            and not captions_overlap(item.caption, p.caption)
        ]
        if not candidates:
            skipped.append(SwapSkip(item.id, "no caption without shared content words"))
            continue
        rng = item_rng(seed, f"caption-swap:{item.id}")
        partners[item.id] = candidates[rng.randrange(len(candidates))].id
    return SwapResult(partners, tuple(skipped))


@dataclass(frozen=True, eq=False)
class CorpusResult:
    pairs: tuple[InstructionPair, ...]
    skipped: tuple[SwapSkip, ...]


_SAFE_ID = re.compile(r"[^A-Za-z0-9._-]+")


def _reversed_audio_path(out_dir: Path, item: SourceItem) -> Path:
    return out_dir / f"{_SAFE_ID.sub('_', item.id)}.reversed.wav"


def synthesize_corpus(
    items: Iterable[SourceItem],
    target_counts: Mapping[str, int],
    seed: int,
    out_dir,
) -> CorpusResult:
    """Build a balanced instruction corpus from source items.

    Per scenario, the requested count splits into four equal groups: original
    consistency pairs (excellent), original quality pairs (excellent),
    reversed-audio quality pairs (bad), and swapped consistency pairs (bad).
    Reversed clips are written under out_dir. Counts must be divisible by
    four; that is what keeps both the dimension halves and the label halves
    exact. Items whose swap cannot be satisfied are replaced from the unused
    remainder when possible, otherwise a shortfall error lists what is
    missing per scenario.
    """
    items = list(items)
    out_dir = Path(out_dir)
    for scenario in target_counts:
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario in targets: {scenario!r}")
    for scenario, count in target_counts.items():
        if count < 0 or count % 4 != 0:
            raise ValueError(
                f"target for {scenario} must be a non-negative multiple of 4, got {count}"
            )

    by_scenario = {s: [it for it in items if it.scenario == s] for s in SCENARIOS}
    deficits = {
        s: target_counts.get(s, 0) - len(by_scenario[s])
        for s in SCENARIOS
        if target_counts.get(s, 0) > len(by_scenario[s])
    }
    if deficits:
        detail = ", ".join(f"{s}: short {d} item(s)" for s, d in sorted(deficits.items()))
        raise CorpusShortfallError(f"not enough source items ({detail})")

    pairs: list[InstructionPair] = []
    all_skips: list[SwapSkip] = []
    by_id = {it.id: it for it in items}
    for scenario in SCENARIOS:
        target = target_counts.get(scenario, 0)
        if target == 0:
            continue
        scenario_items = list(by_scenario[scenario])
        rng = item_rng(seed, f"scenario:{scenario}")
        rng.shuffle(scenario_items)
        quarter = target // 4
        base = scenario_items[:target]
        spares = scenario_items[target:]
        original_consistency = base[:quarter]
        original_quality = base[quarter : 2 * quarter]
        reversed_quality = base[2 * quarter : 3 * quarter]
        swap_consistency = base[3 * quarter :]

        chosen_swaps, swap_skips = _resolve_swaps(
            scenario, swap_consistency, spares, items, seed
        )
        all_skips.extend(swap_skips)

        for item in original_consistency:
            pairs.append(_original_pair(item, "consistency"))
        for item in original_quality:
            pairs.append(_original_pair(item, "audio_quality"))
        for item in reversed_quality:
            pairs.append(_reversed_pair(item, out_dir))
        for item, partner_id in chosen_swaps:
            pairs.append(_swapped_pair(item, by_id[partner_id]))
    return CorpusResult(tuple(pairs), tuple(all_skips))


def _resolve_swaps(scenario, wanted, spares, all_items, seed):
    """Find a swap partner for each slot, pulling spare items on failure."""
    if scenario == "audio-video":
        pool = [it for it in all_items if it.scenario == "audio-video"]
        swap = lambda batch: swap_audio_cross_category(batch, seed, pool)
    else:
        pool = [it for it in all_items if it.scenario == scenario]
        swap = lambda batch: swap_caption_no_overlap(batch, seed, pool)

    chosen: list = []
    skips: list[SwapSkip] = []
    queue = list(wanted)
    reserve = list(spares)
    while queue:
        result = swap(queue)
        for item in queue:
            if item.id in result.partners:
                chosen.append((item, result.partners[item.id]))
        skips.extend(result.skipped)
        failed = len(result.skipped)
        if failed == 0:
            break
        if len(reserve) < failed:
            raise CorpusShortfallError(
                f"{scenario}: {failed} swap(s) unsatisfiable and only"
                f" {len(reserve)} spare item(s) left"
            )
        queue, reserve = reserve[:failed], reserve[failed:]
    return chosen, skips


def _original_pair(item: SourceItem, dimension: str) -> InstructionPair:
    template = render_instruction(item.scenario, dimension, masked=False, levels=LABEL_GOOD)
    return InstructionPair(
        scenario=item.scenario,
        dimension=dimension,
        instruction=template.instruction,
        response=template.response,
        label=LABEL_GOOD,
        provenance=PROVENANCE_ORIGINAL,
        audio_path=item.audio_path,
        video_path=item.video_path,
        caption=item.caption,
    )


def _reversed_pair(item: SourceItem, out_dir: Path) -> InstructionPair:
    template = render_instruction(item.scenario, "audio_quality", masked=False, levels=LABEL_BAD)
    out_path = _reversed_audio_path(out_dir, item)
    try:
        clip = read_wav(item.audio_path)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot reverse audio for {item.id!r}: {exc}") from None
    write_wav(out_path, reverse_audio(clip))
    return InstructionPair(
        scenario=item.scenario,
        dimension="audio_quality",
        instruction=template.instruction,
        response=template.response,
        label=LABEL_BAD,
        provenance=PROVENANCE_AUDIO_REVERSED,
        audio_path=str(out_path),
        video_path=item.video_path,
        caption=item.caption,
    )


def _swapped_pair(item: SourceItem, partner: SourceItem) -> InstructionPair:
    template = render_instruction(item.scenario, "consistency", masked=False, levels=LABEL_BAD)
    if item.scenario == "audio-video":
        return InstructionPair(
            scenario=item.scenario,
            dimension="consistency",
            instruction=template.instruction,
            response=template.response,
            label=LABEL_BAD,
            provenance=PROVENANCE_AUDIO_SWAPPED,
            audio_path=partner.audio_path,
            video_path=item.video_path,
            caption=item.caption,
        )
    return InstructionPair(
        scenario=item.scenario,
        dimension="consistency",
        instruction=template.instruction,
        response=template.response,
        label=LABEL_BAD,
        provenance=PROVENANCE_CAPTION_SWAPPED,
        audio_path=item.audio_path,
        video_path=item.video_path,
        caption=partner.caption,
    )


def read_source_items_jsonl(path) -> list[SourceItem]:
    return _read_jsonl(path, SourceItem.from_json_dict)


def write_source_items_jsonl(path, items: Iterable[SourceItem]) -> None:
    _write_jsonl(path, (it.to_json_dict() for it in items))


def read_corpus_jsonl(path) -> list[InstructionPair]:
    return _read_jsonl(path, InstructionPair.from_json_dict)


def write_corpus_jsonl(path, pairs: Iterable[InstructionPair]) -> None:
    _write_jsonl(path, (p.to_json_dict() for p in pairs))


def corpus_sha256(pairs: Iterable[InstructionPair]) -> str:
    """Digest of the canonical manifest serialization."""
    h = hashlib.sha256()
    for pair in pairs:
        h.update(json.dumps(pair.to_json_dict(), sort_keys=True).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


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
