"""Benchmark manifest types: scored items and multi-candidate pair groups."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from .subjective import MosRecord


@dataclass(frozen=True)
class AgavItem:
    """One generated audio-visual clip in a benchmark manifest.

    source_video_id ties together items generated from the same silent
    video; vta_method names the generator. ground_truth carries the MOS
    record when the manifest is used for scoring evaluation.
    """

    id: str
    video_uri: str
    audio_uri: str
    source_video_id: str = ""
    category: str = ""
    vta_method: str = ""
    ground_truth: MosRecord | None = None
    group_id: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("item id must be non-empty")
        if not self.video_uri or not self.audio_uri:
            raise ValueError(f"item {self.id!r} needs video and audio URIs")

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "video_uri": self.video_uri,
            "audio_uri": self.audio_uri,
            "source_video_id": self.source_video_id,
            "category": self.category,
            "vta_method": self.vta_method,
            "ground_truth": self.ground_truth.to_json_dict() if self.ground_truth else None,
            "group_id": self.group_id,
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "AgavItem":
        try:
            gt = raw.get("ground_truth")
            return cls(
                id=str(raw["id"]),
                video_uri=str(raw["video_uri"]),
                audio_uri=str(raw["audio_uri"]),
                source_video_id=str(raw.get("source_video_id") or ""),
                category=str(raw.get("category") or ""),
                vta_method=str(raw.get("vta_method") or ""),
                ground_truth=MosRecord.from_json_dict(gt) if gt else None,
                group_id=raw.get("group_id"),
            )
        except KeyError as exc:
            raise ValueError(f"item missing key {exc}") from None


def validate_items(items: Iterable[AgavItem]) -> list[AgavItem]:
    """Reject duplicate ids and same-generator duplicates per source video."""
    items = list(items)
    seen_ids = set()
    seen_pairs = set()
    for item in items:
        if item.id in seen_ids:
            raise ValueError(f"duplicate item id: {item.id!r}")
        seen_ids.add(item.id)
        if item.source_video_id and item.vta_method:
            pair = (item.source_video_id, item.vta_method)
            if pair in seen_pairs:
                raise ValueError(
                    f"items from video {item.source_video_id!r} repeat"
                    f" generator {item.vta_method!r}"
                )
            seen_pairs.add(pair)
    return items


@dataclass(frozen=True, eq=False)
class PairGroup:
    """One video with several candidate audio tracks, exactly one correct."""

    group_id: str
    source_page: str
    items: tuple[AgavItem, ...]
    correct_item_id: str

    def __post_init__(self):
        if len(self.items) < 2:
            raise ValueError(f"group {self.group_id!r} needs at least two candidates")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError(f"group {self.group_id!r} has duplicate item ids")
        if self.correct_item_id not in ids:
            raise ValueError(
                f"group {self.group_id!r}: correct item {self.correct_item_id!r}"
                " is not among the candidates"
            )

    @property
    def correct_item(self) -> AgavItem:
        return next(it for it in self.items if it.id == self.correct_item_id)

    @property
    def video_uri(self) -> str:
        return self.items[0].video_uri

    def to_json_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "source_page": self.source_page,
            "correct_item_id": self.correct_item_id,
            "items": [it.to_json_dict() for it in self.items],
        }

    @classmethod
    def from_json_dict(cls, raw: Mapping) -> "PairGroup":
        try:
            return cls(
                group_id=str(raw["group_id"]),
                source_page=str(raw["source_page"]),
                items=tuple(AgavItem.from_json_dict(d) for d in raw["items"]),
                correct_item_id=str(raw["correct_item_id"]),
            )
        except KeyError as exc:
            raise ValueError(f"pair group missing key {exc}") from None


def read_items_jsonl(path) -> list[AgavItem]:
    return validate_items(_read_jsonl(path, AgavItem.from_json_dict))


def write_items_jsonl(path, items: Iterable[AgavItem]) -> None:
    _write_jsonl(path, (it.to_json_dict() for it in items))


def read_groups_jsonl(path) -> list[PairGroup]:
    groups = _read_jsonl(path, PairGroup.from_json_dict)
    seen = set()
    for g in groups:
        if g.group_id in seen:
            raise ValueError(f"duplicate group id: {g.group_id!r}")
        seen.add(g.group_id)
    return groups


def write_groups_jsonl(path, groups: Iterable[PairGroup]) -> None:
    _write_jsonl(path, (g.to_json_dict() for g in groups))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
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
