"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from agavkit.audio import WaveAudio, write_wav
from agavkit.corpus import SourceItem

CATEGORIES = ("nature", "urban", "fantasy", "machines")

# Disjoint word pools so any two toy captions share zero content tokens.
_CAPTION_WORDS = [
    ("otter", "splashing", "creek"),
    ("thunder", "rumbling", "valley"),
    ("sparrow", "chirping", "hedge"),
    ("engine", "idling", "garage"),
    ("kettle", "whistling", "stove"),
    ("waves", "crashing", "pier"),
    ("drums", "pounding", "arena"),
    ("bees", "buzzing", "orchard"),
    ("train", "screeching", "tunnel"),
    ("wolf", "howling", "ridge"),
    ("rain", "dripping", "awning"),
    ("crowd", "cheering", "stadium"),
    ("glass", "shattering", "hallway"),
    ("horse", "galloping", "meadow"),
    ("saw", "grinding", "workshop"),
    ("owl", "hooting", "barn"),
    ("brook", "gurgling", "forest"),
    ("siren", "wailing", "avenue"),
    ("cat", "purring", "sofa"),
    ("anvil", "clanging", "forge"),
    ("geese", "honking", "marsh"),
    ("fan", "humming", "attic"),
    ("surf", "foaming", "lagoon"),
    ("chimes", "tinkling", "porch"),
    ("frog", "croaking", "pond"),
    ("hail", "pelting", "rooftop"),
    ("violin", "soaring", "theatre"),
    ("drill", "rattling", "basement"),
    ("gulls", "squawking", "harbor"),
    ("embers", "crackling", "hearth"),
    ("skates", "scraping", "rink"),
    ("monks", "chanting", "cloister"),
    ("cork", "popping", "cellar"),
    ("cicadas", "droning", "grove"),
    ("turbine", "whirring", "hangar"),
    ("brakes", "squealing", "junction"),
]


def make_clip(seed: int, frames: int = 200) -> WaveAudio:
    rng = np.random.default_rng(seed)
    data = rng.integers(-2000, 2000, size=(frames, 1), dtype=np.int16)
    return WaveAudio(8000, data)


def make_toy_sources(root: Path, n_av: int, n_at: int, n_mt: int, seed: int = 0):
    """Write WAV-backed source items under root, returning the item list.

    Captions draw from pairwise-disjoint word pools and categories rotate,
    so caption swaps and cross-category audio swaps always have partners.
    """
    media = root / "media"
    media.mkdir(parents=True, exist_ok=True)
    items = []
    counter = 0

    def next_caption():
        nonlocal counter
        words = _CAPTION_WORDS[counter % len(_CAPTION_WORDS)]
        suffix = counter // len(_CAPTION_WORDS)
        caption = "the " + " ".join(words)
        if suffix:
            caption += f" take{suffix}"
        counter += 1
        return caption

    for idx in range(n_av):
        item_id = f"av{idx:03d}"
        wav = media / f"{item_id}.wav"
        write_wav(wav, make_clip(seed * 1000 + idx))
        items.append(
            SourceItem(
                id=item_id,
                scenario="audio-video",
                category=CATEGORIES[idx % len(CATEGORIES)],
                audio_path=str(wav),
                video_path=str(media / f"{item_id}.mp4"),
            )
        )
    for idx in range(n_at):
        item_id = f"at{idx:03d}"
        wav = media / f"{item_id}.wav"
        write_wav(wav, make_clip(seed * 1000 + 500 + idx))
        items.append(
            SourceItem(
                id=item_id,
                scenario="audio-text",
                category=CATEGORIES[idx % len(CATEGORIES)],
                audio_path=str(wav),
                caption=next_caption(),
            )
        )
    for idx in range(n_mt):
        item_id = f"mt{idx:03d}"
        wav = media / f"{item_id}.wav"
        write_wav(wav, make_clip(seed * 1000 + 800 + idx))
        items.append(
            SourceItem(
                id=item_id,
                scenario="music-text",
                category=CATEGORIES[idx % len(CATEGORIES)],
                audio_path=str(wav),
                caption=next_caption(),
            )
        )
    return items
