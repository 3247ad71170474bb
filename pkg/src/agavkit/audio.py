"""Small WAV toolbox: load, save, reverse, and resize 16-bit PCM clips.

Only uncompressed 16-bit PCM RIFF files are handled; anything else should be
converted before it reaches this package. Sample data lives in an int16
array of shape (frames, channels), so reversing or padding never touches the
sample values themselves.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SAMPLE_WIDTH_BYTES = 2


@dataclass(frozen=True, eq=False)
class WaveAudio:
    """In-memory PCM clip: int16 samples shaped (frames, channels)."""

    sample_rate: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got shape {self.samples.shape}")
        if self.samples.dtype != np.int16:
            raise ValueError(f"samples must be int16, got {self.samples.dtype}")
        if self.samples.shape[0] < 1 or self.samples.shape[1] < 1:
            raise ValueError(f"empty clip: shape {self.samples.shape}")

    @property
    def n_frames(self) -> int:
        return int(self.samples.shape[0])

    @property
    def channels(self) -> int:
        return int(self.samples.shape[1])

    @property
    def duration_seconds(self) -> float:
        return self.n_frames / self.sample_rate

    def __eq__(self, other) -> bool:
        if not isinstance(other, WaveAudio):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )


def read_wav(path) -> WaveAudio:
    """Load an uncompressed 16-bit PCM WAV file."""
    with wave.open(str(path), "rb") as fh:
        if fh.getcomptype() != "NONE":
            raise ValueError(f"{path}: compressed WAV is not supported")
        width = fh.getsampwidth()
        if width != SAMPLE_WIDTH_BYTES:
            raise ValueError(f"{path}: expected 16-bit samples, got {8 * width}-bit")
        channels = fh.getnchannels()
        frames = fh.getnframes()
        raw = fh.readframes(frames)
        rate = fh.getframerate()
    data = np.frombuffer(raw, dtype="<i2").reshape(-1, channels)
    return WaveAudio(rate, data.astype(np.int16, copy=True))


def write_wav(path, audio: WaveAudio) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(audio.channels)
        fh.setsampwidth(SAMPLE_WIDTH_BYTES)
        fh.setframerate(audio.sample_rate)
        fh.writeframes(audio.samples.astype("<i2").tobytes())


def reverse_audio(audio: WaveAudio) -> WaveAudio:
    """Flip the frame order; channels stay aligned and values are untouched."""
    return WaveAudio(audio.sample_rate, audio.samples[::-1].copy())


def segment_and_fit(audio: WaveAudio, segments: int, target_frames: int) -> WaveAudio:
    """Split into contiguous segments, rejoin, then crop or zero-pad the tail.

    Splitting then concatenating keeps the frame sequence identical, so the
    result is the original clip cut (or extended with trailing silence) to
    exactly target_frames frames.
    """
    if segments < 1:
        raise ValueError(f"segments must be >= 1, got {segments}")
    if segments > audio.n_frames:
        raise ValueError(
            f"cannot split {audio.n_frames} frames into {segments} segments"
        )
    if target_frames < 1:
        raise ValueError(f"target_frames must be >= 1, got {target_frames}")
    parts = np.array_split(audio.samples, segments, axis=0)
    joined = np.concatenate(parts, axis=0)
    if joined.shape[0] >= target_frames:
        fitted = joined[:target_frames]
    else:
        pad = np.zeros((target_frames - joined.shape[0], audio.channels), dtype=np.int16)
        fitted = np.concatenate([joined, pad], axis=0)
    return WaveAudio(audio.sample_rate, fitted.astype(np.int16, copy=True))
