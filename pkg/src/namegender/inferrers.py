"""Uniform inference interface and the inferrers that implement it.

Every inferrer answers infer_batch with exactly one Prediction per input
name, in input order, tagged with the inferrer's id. External HTTP
adapters degrade per-name failures to unknown predictions instead of
aborting the batch; only configuration problems (bad credential
reference, endpoint unreachable on the very first request) fail fast.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence
from urllib.parse import quote

import requests

from .mle import GenderLabel, MleModel, Prediction

logger = logging.getLogger(__name__)

UNLIMITED_BATCH = 10**9

# Six-way label vocabulary collapsed onto the four labels we score.
DEFAULT_LABEL_ALIASES: Mapping[str, GenderLabel] = {
    "female": GenderLabel.FEMALE,
    "mostly female": GenderLabel.FEMALE,
    "mostly_female": GenderLabel.FEMALE,
    "male": GenderLabel.MALE,
    "mostly male": GenderLabel.MALE,
    "mostly_male": GenderLabel.MALE,
    "andy": GenderLabel.AMBIGUOUS,
    "unknown": GenderLabel.UNKNOWN,
}


class LabelMappingError(ValueError):
    """An external label had no mapping and no default was declared."""


class AdapterConfigError(ValueError):
    """An external adapter is misconfigured."""


class AdapterUnreachableError(RuntimeError):
    """The endpoint did not answer the first probe request."""


class Inferrer(ABC):
    """Base class for anything that can label a batch of names."""

    kind: str = "abstract"

    def __init__(self, id: str, batch_limit: int = UNLIMITED_BATCH) -> None:
        if batch_limit < 1:
            raise ValueError("batch_limit must be positive")
        self.id = id
        self.batch_limit = batch_limit

    def infer_batch(self, names: Sequence[str]) -> list[Prediction]:
        """One prediction per input name, in input order."""
        if not names:
            raise ValueError("names must be non-empty")
        out: list[Prediction] = []
        for start in range(0, len(names), self.batch_limit):
            out.extend(self._infer_chunk(names[start : start + self.batch_limit]))
        return out

    def infer(self, name: str) -> Prediction:
        return self.infer_batch([name])[0]

    @abstractmethod
    def _infer_chunk(self, names: Sequence[str]) -> list[Prediction]:
        ...


class MockInferrer(Inferrer):
    """Deterministic inferrer backed by a fixed name -> prediction map."""

    kind = "mock"

    def __init__(self, id: str, predictions: Mapping[str, tuple[GenderLabel, float | None]]) -> None:
        super().__init__(id)
        self._predictions = dict(predictions)

    @classmethod
    def from_json(cls, path: str | Path, id: str | None = None) -> "MockInferrer":
        """Load a mapping file: {"anna": {"label": "female", "p_female": 0.99}}."""
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        predictions = {}
        for name, entry in raw.items():
            label = GenderLabel(entry["label"])
            predictions[name] = (label, entry.get("p_female"))
        return cls(id if id is not None else path.stem, predictions)

    def _infer_chunk(self, names: Sequence[str]) -> list[Prediction]:
        out = []
        for name in names:
            entry = self._predictions.get(name)
            if entry is None:
                out.append(Prediction(GenderLabel.UNKNOWN, None, self.id))
            else:
                label, p_female = entry
                out.append(Prediction(label, p_female, self.id))
        return out


class MleInferrer(Inferrer):
    """Adapter exposing a trained MleModel through the batch interface."""

    kind = "builtin-mle"

    def __init__(self, model: MleModel, id: str | None = None) -> None:
        super().__init__(id if id is not None else model.model_id)
        self.model = model

    def _infer_chunk(self, names: Sequence[str]) -> list[Prediction]:
        out = []
        for name in names:
            pred = self.model.classify(name)
            if pred.source != self.id:
                pred = Prediction(pred.label, pred.p_female, self.id)
            out.append(pred)
        return out


class RateLimiter:
    """Spaces dispatches at least 1/rate seconds apart. Thread-safe."""

    def __init__(self, rate_per_second: float) -> None:
        if rate_per_second <= 0:
            raise ValueError("rate must be positive")
        self._interval = 1.0 / rate_per_second
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            if wait > 0:
                time.sleep(wait)
                now = time.monotonic()
            self._next_slot = max(self._next_slot, now) + self._interval


def normalize_confidence(raw: object, scale: str) -> float:
    """Coerce a reported confidence onto [0, 1]."""
    value = float(raw)  # type: ignore[arg-type]
    if scale == "percent":
        value /= 100.0
    elif scale != "unit":
        raise ValueError(f"unknown confidence scale {scale!r}")
    return min(1.0, max(0.0, value))


def map_external_label(
    raw_label: object,
    raw_confidence: object | None,
    mapping: Mapping[str, GenderLabel],
    *,
    default: GenderLabel | None = None,
    confidence_scale: str = "unit",
    source: str = "",
) -> Prediction:
    """Translate an external service's (label, confidence) into a Prediction.

    Definite labels with no reported confidence are taken at full
    confidence; androgynous labels map to ambiguous at p(female) = 0.5.
    """
    key = str(raw_label).strip().lower()
    label = mapping.get(key, default)
    if label is None:
        raise LabelMappingError(f"no mapping for external label {raw_label!r}")
    if label is GenderLabel.UNKNOWN:
        return Prediction(GenderLabel.UNKNOWN, None, source)
    if label is GenderLabel.AMBIGUOUS:
        return Prediction(GenderLabel.AMBIGUOUS, 0.5, source)
    confidence = 1.0 if raw_confidence is None else normalize_confidence(raw_confidence, confidence_scale)
    p_female = confidence if label is GenderLabel.FEMALE else 1.0 - confidence
    return Prediction(label, p_female, source)


@dataclass(frozen=True)
class ExternalAdapterConfig:
    """Everything needed to talk to one external inference service."""

    id: str
    endpoint: str
    credential_env: str | None = None
    rate_limit: float = 1.0
    max_attempts: int = 3
    backoff: float = 0.5
    timeout: float = 10.0
    batch_limit: int = 1000
    max_in_flight: int = 1
    label_path: str = "gender"
    confidence_path: str | None = None
    confidence_scale: str = "unit"
    label_aliases: Mapping[str, GenderLabel] = field(default_factory=lambda: dict(DEFAULT_LABEL_ALIASES))
    default_label: GenderLabel | None = None
    cache_dir: str | None = None

    def __post_init__(self) -> None:
        if self.rate_limit <= 0:
            raise AdapterConfigError("rate_limit must be positive")
        if self.max_attempts < 1:
            raise AdapterConfigError("max_attempts must be >= 1")
        if "{name}" not in self.endpoint:
            raise AdapterConfigError("endpoint template must contain {name}")
        if self.confidence_scale not in ("unit", "percent"):
            raise AdapterConfigError(f"bad confidence_scale {self.confidence_scale!r}")
        if self.max_in_flight < 1:
            raise AdapterConfigError("max_in_flight must be >= 1")


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Parse a `key = value` config file; # starts a comment line."""
    fields: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{line_no}: expected key = value")
        fields[key.strip()] = value.strip()
    return fields


_ADAPTER_SCALARS = {
    "rate_limit": float,
    "max_attempts": int,
    "backoff": float,
    "timeout": float,
    "batch_limit": int,
    "max_in_flight": int,
}


def parse_adapter_config(path: str | Path) -> ExternalAdapterConfig:
    """Build an adapter config from a key=value file.

    Label aliases use `label.<gender> = alias, alias, ...` lines; anything
    not listed maps through `default_label` or raises at inference time.
    """
    fields = parse_kv_file(path)
    kwargs: dict[str, object] = {}
    aliases: dict[str, GenderLabel] = {}
    for key, value in fields.items():
        if key.startswith("label."):
            target = GenderLabel(key[len("label.") :])
            for alias in value.split(","):
                aliases[alias.strip().lower()] = target
        elif key == "default_label":
            kwargs["default_label"] = GenderLabel(value)
        elif key in _ADAPTER_SCALARS:
            kwargs[key] = _ADAPTER_SCALARS[key](value)
        elif key in ("id", "endpoint", "credential_env", "label_path", "confidence_path", "confidence_scale", "cache_dir"):
            kwargs[key] = value
        else:
            raise AdapterConfigError(f"{path}: unknown config key {key!r}")
    if "id" not in kwargs or "endpoint" not in kwargs:
        raise AdapterConfigError(f"{path}: id and endpoint are required")
    if aliases:
        kwargs["label_aliases"] = aliases
    return ExternalAdapterConfig(**kwargs)  # type: ignore[arg-type]


def _walk_path(data: object, dotted: str) -> object:
    """Follow a dotted path through parsed JSON; integers index lists."""
    node = data
    for segment in dotted.split("."):
        if isinstance(node, list):
            node = node[int(segment)]
        elif isinstance(node, dict):
            node = node[segment]
        else:
            raise KeyError(f"cannot descend into {type(node).__name__} at {segment!r}")
    return node


class HttpAdapter(Inferrer):
    """Generic adapter for services answering one GET per name with JSON.

    Responses are cached on disk under <cache_dir>/<adapter-id>/<name>.json
    as the verbatim response text, so repeated evaluations do not re-spend
    request quota.
    """

    kind = "external-http"

    def __init__(self, config: ExternalAdapterConfig, session=None) -> None:
        super().__init__(config.id, config.batch_limit)
        self.config = config
        self._session = session
        self._limiter = RateLimiter(config.rate_limit)
        self._ever_succeeded = False

    def _get_session(self):
        if self._session is None:
            self._session = requests.Session()
        return self._session

    def _credential(self) -> str:
        env = self.config.credential_env
        if env is None:
            return ""
        value = os.environ.get(env)
        if not value:
            raise AdapterConfigError(f"{self.id}: credential variable {env!r} is not set")
        return value

    def _cache_path(self, name: str) -> Path | None:
        if self.config.cache_dir is None:
            return None
        return Path(self.config.cache_dir) / self.id / (quote(name, safe="") + ".json")

    def _fetch(self, name: str, credential: str) -> str | None:
        """Return raw response text, or None when all attempts failed."""
        cache = self._cache_path(name)
        if cache is not None and cache.exists():
            return cache.read_text(encoding="utf-8")
        url = self.config.endpoint.format(name=quote(name, safe=""), credential=credential)
        session = self._get_session()
        last_error: Exception | None = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                time.sleep(self.config.backoff * (2 ** (attempt - 1)))
            self._limiter.acquire()
            try:
                response = session.get(url, timeout=self.config.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = RuntimeError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                logger.warning("%s: %r -> HTTP %d", self.id, name, response.status_code)
                return None
            self._ever_succeeded = True
            text = response.text
            if cache is not None:
                cache.parent.mkdir(parents=True, exist_ok=True)
                with tempfile.NamedTemporaryFile(
                    "w", dir=cache.parent, encoding="utf-8", delete=False
                ) as tmp:
                    tmp.write(text)
                os.replace(tmp.name, cache)
            return text
        if isinstance(last_error, (requests.ConnectionError,)) and not self._ever_succeeded:
            raise AdapterUnreachableError(f"{self.id}: endpoint unreachable: {last_error}")
        logger.warning("%s: %r failed after %d attempts: %s", self.id, name, self.config.max_attempts, last_error)
        return None

    def _parse(self, name: str, text: str) -> Prediction:
        try:
            data = json.loads(text)
            label = _walk_path(data, self.config.label_path)
            confidence = None
            if self.config.confidence_path:
                confidence = _walk_path(data, self.config.confidence_path)
            return map_external_label(
                label,
                confidence,
                self.config.label_aliases,
                default=self.config.default_label,
                confidence_scale=self.config.confidence_scale,
                source=self.id,
            )
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            logger.warning("%s: unusable response for %r: %s", self.id, name, exc)
            return Prediction(GenderLabel.UNKNOWN, None, self.id)

    def _infer_one(self, name: str, credential: str) -> Prediction:
        text = self._fetch(name, credential)
        if text is None:
            return Prediction(GenderLabel.UNKNOWN, None, self.id)
        return self._parse(name, text)

    def _infer_chunk(self, names: Sequence[str]) -> list[Prediction]:
        credential = self._credential()
        if self.config.max_in_flight == 1:
            return [self._infer_one(name, credential) for name in names]
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
            return list(pool.map(lambda n: self._infer_one(n, credential), names))
