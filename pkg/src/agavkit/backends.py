"""Scoring backends: the pluggable contract, mock catalogue, and HTTP client.

A backend may support any subset of three capabilities: triple scores (one
number per quality dimension), level logits (raw scores over the five
quality words), and multi-input choice (pick the best audio for a video).
Calling an unsupported capability raises CapabilityError; the evaluation
harness checks capabilities up front instead of poking and hoping.
"""

from __future__ import annotations

import abc
import math
import threading
import time
from dataclasses import dataclass

import httpx

from .corpus import item_rng
from .manifests import AgavItem, PairGroup
from .metrics import LevelLogits, Orientation

# Finite stand-in for "probability zero" so logits stay finite.
_NEG_LARGE = -1e9


class BackendError(Exception):
    """Base for scoring backend failures."""


class CapabilityError(BackendError):
    """The backend does not support the requested call."""


class MediaError(BackendError):
    """The backend could not read or use the referenced media."""


class TransportError(BackendError):
    """The remote backend stayed unreachable after the allowed retries."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class ProtocolViolationError(BackendError):
    """The remote backend answered outside its wire contract."""


@dataclass(frozen=True)
class ScoreTriple:
    audio_quality: float
    consistency: float
    overall: float

    def __post_init__(self):
        for name in ("audio_quality", "consistency", "overall"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")

    def score(self, dimension: str) -> float:
        if dimension not in ("audio_quality", "consistency", "overall"):
            raise ValueError(f"unknown dimension: {dimension!r}")
        return float(getattr(self, dimension))


@dataclass(frozen=True)
class BackendCapability:
    triple: bool = False
    levels: bool = False
    choice: bool = False

    def __post_init__(self):
        if not (self.triple or self.levels or self.choice):
            raise ValueError("a backend must support at least one capability")


@dataclass(frozen=True)
class ChoiceAnswer:
    selected_index: int  # 1-based position among the presented audios

    def __post_init__(self):
        if not isinstance(self.selected_index, int) or self.selected_index < 1:
            raise ValueError(f"selected_index must be a positive int, got {self.selected_index!r}")


class ScoringBackend(abc.ABC):
    """Contract every backend implements; unsupported calls must raise."""

    name: str = "backend"

    @property
    @abc.abstractmethod
    def capabilities(self) -> BackendCapability: ...

    def score(self, item: AgavItem) -> ScoreTriple:
        raise CapabilityError(f"{self.name} does not produce triple scores")

    def level_logits(self, item: AgavItem, dimension: str) -> LevelLogits:
        raise CapabilityError(f"{self.name} does not produce level logits")

    def choose(self, video_uri: str, audio_uris: list[str]) -> ChoiceAnswer:
        raise CapabilityError(f"{self.name} does not answer multi-input choices")


def _require_ground_truth(item: AgavItem):
    if item.ground_truth is None:
        raise ValueError(f"item {item.id!r} carries no ground truth")
    return item.ground_truth


def _ascending_two_point_logits(target: float) -> LevelLogits:
    """Logits whose quality-ascending expected level equals target in [1, 5].

    Mass is split between the two levels bracketing the target; the other
    levels get a large negative logit instead of minus infinity.
    """
    target = max(1.0, min(5.0, target))
    low = math.floor(target)
    frac = target - low
    values = [_NEG_LARGE] * 5
    # Ascending value v sits at index 5 - v of the excellent-first vector.
    if frac == 0.0 or low == 5:
        values[5 - low] = 0.0
    else:
        values[5 - low] = math.log(1.0 - frac)
        values[5 - (low + 1)] = math.log(frac)
    return LevelLogits(tuple(values), Orientation.QUALITY_ASCENDING)


def _mos_to_ascending(mos: float) -> float:
    return 1.0 + 4.0 * mos / 100.0


class OracleTripleBackend(ScoringBackend):
    """Returns the manifest ground truth as its prediction."""

    name = "oracle-triple"

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(triple=True)

    def score(self, item: AgavItem) -> ScoreTriple:
        gt = _require_ground_truth(item)
        return ScoreTriple(gt.audio_quality, gt.consistency, gt.overall)


class OracleLevelsBackend(ScoringBackend):
    """Emits level logits whose expected level reproduces the ground truth.

    The 0-100 MOS maps linearly onto the ascending 1-5 level axis, so the
    derived score is strictly monotone in the true MOS.
    """

    name = "oracle-levels"

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(levels=True)

    def level_logits(self, item: AgavItem, dimension: str) -> LevelLogits:
        gt = _require_ground_truth(item)
        return _ascending_two_point_logits(_mos_to_ascending(gt.score(dimension)))


class OracleChoiceBackend(ScoringBackend):
    """Picks the known-correct audio for each video."""

    name = "oracle-choice"

    def __init__(self, correct_by_video: dict):
        self._correct_by_video = dict(correct_by_video)

    @classmethod
    def from_groups(cls, groups) -> "OracleChoiceBackend":
        table: dict = {}
        for g in groups:
            table.setdefault(g.video_uri, set()).add(g.correct_item.audio_uri)
        return cls(table)

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(choice=True)

    def choose(self, video_uri: str, audio_uris: list[str]) -> ChoiceAnswer:
        correct = self._correct_by_video.get(video_uri, set())
        for pos, uri in enumerate(audio_uris, start=1):
            if uri in correct:
                return ChoiceAnswer(pos)
        raise ValueError(f"no known-correct audio presented for video {video_uri!r}")


class AdversarialChoiceBackend(OracleChoiceBackend):
    """Always picks a known-incorrect audio: a floor for pair accuracy."""

    name = "adversarial"

    def choose(self, video_uri: str, audio_uris: list[str]) -> ChoiceAnswer:
        correct = self._correct_by_video.get(video_uri, set())
        for pos, uri in enumerate(audio_uris, start=1):
            if uri not in correct:
                return ChoiceAnswer(pos)
        raise ValueError(f"every presented audio is correct for video {video_uri!r}")


class FirstPositionBackend(ScoringBackend):
    """Position-biased chooser: always answers 1."""

    name = "first-position"

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(choice=True)

    def choose(self, video_uri: str, audio_uris: list[str]) -> ChoiceAnswer:
        if not audio_uris:
            raise ValueError("no candidates presented")
        return ChoiceAnswer(1)


class UniformRandomBackend(ScoringBackend):
    """Seeded uniform noise for every capability.

    Each call derives its RNG from the seed and the call's identity, so
    results are reproducible and independent of call order.
    """

    name = "uniform-random"

    def __init__(self, seed: int = 0):
        self._seed = seed

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(triple=True, levels=True, choice=True)

    def score(self, item: AgavItem) -> ScoreTriple:
        rng = item_rng(self._seed, f"score:{item.id}")
        return ScoreTriple(*(rng.uniform(0.0, 100.0) for _ in range(3)))

    def level_logits(self, item: AgavItem, dimension: str) -> LevelLogits:
        rng = item_rng(self._seed, f"logits:{item.id}:{dimension}")
        return LevelLogits(tuple(rng.uniform(-5.0, 5.0) for _ in range(5)))

    def choose(self, video_uri: str, audio_uris: list[str]) -> ChoiceAnswer:
        if not audio_uris:
            raise ValueError("no candidates presented")
        key = "choose:" + video_uri + "|" + "\x1f".join(audio_uris)
        rng = item_rng(self._seed, key)
        return ChoiceAnswer(rng.randrange(len(audio_uris)) + 1)


class AdversarialTripleBackend(ScoringBackend):
    """Inverts the ground truth: perfectly anti-correlated predictions."""

    name = "adversarial-triple"

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(triple=True, levels=True)

    def score(self, item: AgavItem) -> ScoreTriple:
        gt = _require_ground_truth(item)
        return ScoreTriple(
            100.0 - gt.audio_quality, 100.0 - gt.consistency, 100.0 - gt.overall
        )

    def level_logits(self, item: AgavItem, dimension: str) -> LevelLogits:
        gt = _require_ground_truth(item)
        return _ascending_two_point_logits(_mos_to_ascending(100.0 - gt.score(dimension)))


class NoisyOracleBackend(ScoringBackend):
    """Ground truth plus seeded Gaussian noise of a chosen sigma."""

    name = "noisy"

    def __init__(self, sigma: float, seed: int = 0):
        if sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {sigma}")
        self._sigma = sigma
        self._seed = seed

    @property
    def capabilities(self) -> BackendCapability:
        return BackendCapability(triple=True)

    def score(self, item: AgavItem) -> ScoreTriple:
        gt = _require_ground_truth(item)
        rng = item_rng(self._seed, f"noise:{item.id}")
        return ScoreTriple(
            gt.audio_quality + rng.gauss(0.0, self._sigma),
            gt.consistency + rng.gauss(0.0, self._sigma),
            gt.overall + rng.gauss(0.0, self._sigma),
        )


_CAPABILITY_NAMES = ("triple", "levels", "choice")


@dataclass(frozen=True)
class HttpBackendConfig:
    base_url: str
    timeout: float = 10.0
    max_retries: int = 2
    backoff_base: float = 0.25
    max_in_flight: int = 4


class HttpBackend(ScoringBackend):
    """Adapter for a remote scorer speaking the JSON wire protocol.

    Transport failures and 5xx responses are retried with exponential
    backoff up to the configured budget; malformed answers raise
    ProtocolViolationError immediately. At most max_in_flight requests run
    concurrently.
    """

    name = "http"

    def __init__(self, config: HttpBackendConfig, transport: httpx.BaseTransport | None = None):
        self._config = config
        self._client = httpx.Client(
            base_url=config.base_url, timeout=config.timeout, transport=transport
        )
        self._gate = threading.Semaphore(config.max_in_flight)
        self._lock = threading.Lock()
        self._capabilities: BackendCapability | None = None
        self.stats = {"requests": 0, "retries": 0}

    def close(self) -> None:
        self._client.close()

    @property
    def capabilities(self) -> BackendCapability:
        with self._lock:
            cached = self._capabilities
        if cached is not None:
            return cached
        payload = self._request("GET", "/capabilities")
        if not isinstance(payload, list) or not all(isinstance(c, str) for c in payload):
            raise ProtocolViolationError(f"capabilities must be a list of strings: {payload!r}")
        unknown = [c for c in payload if c not in _CAPABILITY_NAMES]
        if unknown:
            raise ProtocolViolationError(f"unknown capabilities advertised: {unknown}")
        caps = BackendCapability(**{c: True for c in payload})
        with self._lock:
            self._capabilities = caps
        return caps

    def score(self, item: AgavItem) -> ScoreTriple:
        self._require("triple")
        payload = self._request(
            "POST",
            "/score",
            {"item_id": item.id, "video_uri": item.video_uri, "audio_uri": item.audio_uri},
        )
        try:
            return ScoreTriple(
                float(payload["audio_quality"]),
                float(payload["consistency"]),
                float(payload["overall"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolViolationError(f"bad /score response {payload!r}: {exc}") from None

    def level_logits(self, item: AgavItem, dimension: str) -> LevelLogits:
        self._require("levels")
        payload = self._request(
            "POST",
            "/level_logits",
            {
                "item_id": item.id,
                "video_uri": item.video_uri,
                "audio_uri": item.audio_uri,
                "dimension": dimension,
            },
        )
        try:
            return LevelLogits.from_mapping(
                {k: float(v) for k, v in payload["logits"].items()}
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ProtocolViolationError(
                f"bad /level_logits response {payload!r}: {exc}"
            ) from None

    def choose(self, video_uri: str, audio_uris: list[str]) -> ChoiceAnswer:
        self._require("choice")
        payload = self._request(
            "POST", "/choose", {"video_uri": video_uri, "audio_uris": list(audio_uris)}
        )
        try:
            index = payload["selected_index"]
        except (KeyError, TypeError) as exc:
            raise ProtocolViolationError(f"bad /choose response {payload!r}: {exc}") from None
        if not isinstance(index, int) or isinstance(index, bool):
            raise ProtocolViolationError(f"selected_index must be an integer: {index!r}")
        if not 1 <= index <= len(audio_uris):
            raise ProtocolViolationError(
                f"selected_index {index} outside 1..{len(audio_uris)}"
            )
        return ChoiceAnswer(index)

    def _require(self, capability: str) -> None:
        if not getattr(self.capabilities, capability):
            raise CapabilityError(f"remote backend lacks the {capability} capability")

    def _request(self, method: str, path: str, body: dict | None = None):
        attempts = self._config.max_retries + 1
        last_error = None
        for attempt in range(attempts):
            if attempt:
                with self._lock:
                    self.stats["retries"] += 1
                time.sleep(self._config.backoff_base * 2 ** (attempt - 1))
            try:
                with self._gate:
                    with self._lock:
                        self.stats["requests"] += 1
                    response = self._client.request(method, path, json=body)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise ProtocolViolationError(
                    f"{method} {path} answered HTTP {response.status_code}"
                )
            try:
                return response.json()
            except ValueError:
                raise ProtocolViolationError(f"{method} {path} returned non-JSON body") from None
        raise TransportError(
            f"{method} {path} failed after {attempts} attempt(s): {last_error}",
            attempts=attempts,
        )


def backend_from_spec(
    spec: str,
    *,
    seed: int = 0,
    items=None,
    groups=None,
    http_config: HttpBackendConfig | None = None,
) -> ScoringBackend:
    """Build a backend from a CLI-style spec string.

    Mock specs (optionally prefixed "mock:"): oracle-triple, oracle-levels,
    oracle-choice, adversarial, adversarial-triple, first-position,
    uniform-random, noisy:SIGMA. The spec "http" uses http_config.
    """
    name = spec.strip()
    if name.startswith("mock:"):
        name = name[len("mock:") :]
    if name == "http":
        if http_config is None:
            raise ValueError("http backend needs a base URL")
        return HttpBackend(http_config)
    if name == "oracle-triple":
        return OracleTripleBackend()
    if name == "oracle-levels":
        return OracleLevelsBackend()
    if name == "oracle-choice":
        if groups is None:
            raise ValueError("oracle-choice needs pair groups")
        return OracleChoiceBackend.from_groups(groups)
    if name == "adversarial":
        if groups is None:
            raise ValueError("adversarial needs pair groups")
        return AdversarialChoiceBackend.from_groups(groups)
    if name == "adversarial-triple":
        return AdversarialTripleBackend()
    if name == "first-position":
        return FirstPositionBackend()
    if name == "uniform-random":
        return UniformRandomBackend(seed)
    if name.startswith("noisy"):
        parts = name.split(":")
        if len(parts) != 2:
            raise ValueError("noisy backend spec is noisy:SIGMA")
        return NoisyOracleBackend(sigma=float(parts[1]), seed=seed)
    raise ValueError(f"unknown backend spec: {spec!r}")
