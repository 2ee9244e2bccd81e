"""Uniform client over chat-completion providers.

Handles prompt rendering, spec extraction from raw model output, retries with
backoff, per-provider concurrency bounds, judge recommendation, and a
content-addressed record/replay store for offline runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import httpx

from .core import ModelResponse, SchemaError, VizSpec, vizspec_from_dict


@dataclass(frozen=True)
class ModelRef:
    provider_id: str
    model_id: str
    family: str
    display_name: str
    strength: int = 0

    @property
    def key(self) -> str:
        return f"{self.provider_id}/{self.model_id}"


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    endpoint: str
    auth_header: str = "Authorization"
    auth_prefix: str = "Bearer "


@dataclass
class ModelRegistry:
    models: list[ModelRef]
    providers: dict[str, ProviderConfig]

    def __post_init__(self) -> None:
        seen = set()
        for m in self.models:
            if m.key in seen:
                raise SchemaError(f"duplicate model in registry: {m.key}")
            seen.add(m.key)

    def find(self, ref: str) -> ModelRef:
        """Resolve 'provider/model' or bare model id."""
        for m in self.models:
            if m.key == ref or m.model_id == ref:
                return m
        raise SchemaError(f"unknown model: {ref}")

    def by_strength(self) -> list[ModelRef]:
        return sorted(
            self.models, key=lambda m: (-m.strength, self.models.index(m))
        )

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ModelRegistry":
        providers = {
            pid: ProviderConfig(
                provider_id=pid,
                endpoint=p["endpoint"],
                auth_header=p.get("authHeader", "Authorization"),
                auth_prefix=p.get("authPrefix", "Bearer "),
            )
            for pid, p in raw.get("providers", {}).items()
        }
        models = [
            ModelRef(
                provider_id=m["providerId"],
                model_id=m["modelId"],
                family=m["family"],
                display_name=m.get("displayName", m["modelId"]),
                strength=int(m.get("strength", 0)),
            )
            for m in raw["models"]
        ]
        return cls(models=models, providers=providers)

    @classmethod
    def from_file(cls, path: str | Path) -> "ModelRegistry":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def default(cls) -> "ModelRegistry":
        ref = resources.files("cvabench").joinpath("model_registry.json")
        return cls.from_dict(json.loads(ref.read_text()))


@dataclass(frozen=True)
class GenerationRequest:
    system_prompt: str
    messages: tuple[tuple[str, str], ...]  # (role, content) pairs, in order
    output_schema: str = ""
    temperature: float = 0.2
    max_tokens: int = 2048
    seed: int | None = None


@dataclass(frozen=True)
class JudgeRecommendation:
    model: ModelRef
    self_preference_warning: bool = False

    @property
    def annotation(self) -> str:
        return f"{self.model.display_name} (recommended)"


def recommend_judge(
    candidates: Sequence[ModelRef], registry: ModelRegistry
) -> JudgeRecommendation:
    """Strongest registry model outside every candidate family; falls back to
    the strongest overall with an explicit self-preference warning."""
    families = {c.family for c in candidates}
    ranked = registry.by_strength()
    for m in ranked:
        if m.family not in families:
            return JudgeRecommendation(model=m)
    return JudgeRecommendation(model=ranked[0], self_preference_warning=True)


# ---------------------------------------------------------------------------
# Prompt rendering
# ---------------------------------------------------------------------------

_PLACEHOLDER = re.compile(r"\{([a-z][a-z0-9-]*)\}")

KNOWN_PLACEHOLDERS = ("datasource", "utterance", "output-schema", "prior-turns")


def render_prompt(template: str, bindings: Mapping[str, str]) -> str:
    """Deterministic placeholder substitution; unresolved placeholders fail
    before any network call."""
    missing = [
        name
        for name in sorted(set(_PLACEHOLDER.findall(template)))
        if name in KNOWN_PLACEHOLDERS and name not in bindings
    ]
    if missing:
        raise SchemaError(
            f"template missing required placeholder: {missing[0]}"
            if len(missing) == 1
            else "template missing required placeholders: " + ", ".join(missing)
        )

    def sub(m: re.Match) -> str:
        name = m.group(1)
        return str(bindings.get(name, m.group(0)))

    return _PLACEHOLDER.sub(sub, template)


# ---------------------------------------------------------------------------
# Output extraction
# ---------------------------------------------------------------------------

_FENCED = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def _first_json_object(text: str) -> tuple[str, int, int] | None:
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        esc = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if esc:
                    esc = False
                elif ch == "\\":
                    esc = True
                elif ch == '"':
                    in_str = False
                continue
            if ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return text[start : i + 1], start, i + 1
        start = text.find("{", start + 1)
    return None


def extract_spec(raw: str) -> tuple[VizSpec | None, str, str | None]:
    """Pull the visualization spec out of raw model output.

    Returns (spec, remaining_prose, error). Tries a fenced block first, then
    the first balanced JSON object.
    """
    candidates: list[tuple[str, int, int]] = []
    m = _FENCED.search(raw)
    if m:
        candidates.append((m.group(1), m.start(), m.end()))
    obj = _first_json_object(raw)
    if obj:
        candidates.append(obj)
    last_error: str | None = "no JSON object found in output"
    for text, start, end in candidates:
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError as exc:
            last_error = f"JSON parse error: {exc}"
            continue
        try:
            spec = vizspec_from_dict(parsed)
        except (SchemaError, KeyError, TypeError) as exc:
            last_error = f"spec validation error: {exc}"
            continue
        prose = (raw[:start] + raw[end:]).strip()
        return spec, prose, None
    return None, raw.strip(), last_error


# ---------------------------------------------------------------------------
# Record/replay store
# ---------------------------------------------------------------------------

def request_fingerprint(provider_id: str, model_id: str, req: GenerationRequest) -> str:
    payload = {
        "provider": provider_id,
        "model": model_id,
        "system": req.system_prompt,
        "messages": list(req.messages),
        "temperature": req.temperature,
        "maxTokens": req.max_tokens,
        "seed": req.seed,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode()).hexdigest()


class ReplayStore:
    """Content-addressed JSON fixtures keyed by request hash."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict[str, Any] | None:
        p = self._path(key)
        if not p.exists():
            self.misses += 1
            return None
        self.hits += 1
        return json.loads(p.read_text())

    def put(self, key: str, request: Mapping[str, Any], response: Mapping[str, Any]) -> None:
        p = self._path(key)
        p.write_text(
            json.dumps({"request": dict(request), "response": dict(response)}, indent=2)
        )


class ProviderError(Exception):
    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class ConfigurationError(Exception):
    """Missing credentials or registry problems; never retried."""


Transport = Callable[[ProviderConfig, ModelRef, GenerationRequest, str], dict[str, Any]]


def http_transport(
    provider: ProviderConfig, model: ModelRef, req: GenerationRequest, api_key: str
) -> dict[str, Any]:
    """JSON chat-completion call per the registry endpoint template."""
    messages = [{"role": "system", "content": req.system_prompt}]
    messages += [{"role": role, "content": content} for role, content in req.messages]
    body: dict[str, Any] = {
        "model": model.model_id,
        "messages": messages,
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    if req.seed is not None:
        body["seed"] = req.seed
    headers = {provider.auth_header: provider.auth_prefix + api_key}
    try:
        resp = httpx.post(provider.endpoint, json=body, headers=headers, timeout=120.0)
    except httpx.HTTPError as exc:
        raise ProviderError(f"transport error: {exc}", retryable=True) from exc
    if resp.status_code == 429 or resp.status_code >= 500:
        raise ProviderError(
            f"provider returned {resp.status_code}", status=resp.status_code,
            retryable=True,
        )
    if resp.status_code in (401, 403):
        raise ConfigurationError(
            f"authentication failed for provider '{provider.provider_id}' "
            f"({resp.status_code})"
        )
    if resp.status_code >= 400:
        raise ProviderError(
            f"provider returned {resp.status_code}: {resp.text[:200]}",
            status=resp.status_code,
        )
    data = resp.json()
    content = data["choices"][0]["message"]["content"]
    return {"content": content, "usage": data.get("usage")}


REPAIR_INSTRUCTION = (
    "The previous reply did not contain a valid visualization spec JSON object. "
    "Reply again with the corrected JSON spec in a fenced ```json block, "
    "followed by the explanation."
)


class Gateway:
    """Thread-safe client with per-provider admission control.

    Modes: 'replay' serves only from the store (offline), 'record' calls the
    transport and persists every exchange, 'live' calls the transport only.
    """

    def __init__(
        self,
        registry: ModelRegistry,
        mode: str = "live",
        replay_store: ReplayStore | None = None,
        transport: Transport = http_transport,
        concurrency: int = 4,
        retry_attempts: int = 3,
        backoff_base: float = 1.0,
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown gateway mode: {mode}")
        if mode in ("record", "replay") and replay_store is None:
            raise ValueError(f"mode '{mode}' requires a replay store")
        self.registry = registry
        self.mode = mode
        self.store = replay_store
        self.transport = transport
        self.retry_attempts = retry_attempts
        self.backoff_base = backoff_base
        self.sleeper = sleeper
        self.rng = rng or random.Random(0)
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        self._sem_lock = threading.Lock()
        self.concurrency = concurrency

    def _semaphore(self, provider_id: str) -> threading.BoundedSemaphore:
        with self._sem_lock:
            if provider_id not in self._semaphores:
                self._semaphores[provider_id] = threading.BoundedSemaphore(
                    self.concurrency
                )
            return self._semaphores[provider_id]

    def _api_key(self, provider_id: str) -> str:
        var = f"PROVIDER_{provider_id.upper().replace('-', '_')}_API_KEY"
        key = os.environ.get(var, "")
        if not key:
            raise ConfigurationError(
                f"missing credential for provider '{provider_id}': set {var}"
            )
        return key

    def _complete(self, model: ModelRef, req: GenerationRequest) -> tuple[dict[str, Any], float]:
        """Raw completion with replay/record handling; returns (payload, latency_ms)."""
        key = request_fingerprint(model.provider_id, model.model_id, req)
        if self.mode in ("record", "replay") and self.store is not None:
            cached = self.store.get(key)
            if cached is not None:
                return cached["response"], float(
                    cached["response"].get("latencyMs", 0.0)
                )
            if self.mode == "replay":
                raise ConfigurationError(
                    f"replay store has no fixture for request {key[:12]}… "
                    "(offline run cannot reach the network)"
                )
        provider = self.registry.providers.get(model.provider_id)
        if provider is None:
            raise ConfigurationError(
                f"no provider config for '{model.provider_id}' in the registry"
            )
        api_key = self._api_key(model.provider_id)
        sem = self._semaphore(model.provider_id)
        last: Exception | None = None
        with sem:
            for attempt in range(self.retry_attempts):
                start = time.monotonic()
                try:
                    payload = self.transport(provider, model, req, api_key)
                    latency = (time.monotonic() - start) * 1000.0
                    payload.setdefault("latencyMs", latency)
                    if self.mode == "record" and self.store is not None:
                        self.store.put(
                            key,
                            request={
                                "provider": model.provider_id,
                                "model": model.model_id,
                                "system": req.system_prompt,
                                "messages": list(req.messages),
                            },
                            response=payload,
                        )
                    return payload, payload["latencyMs"]
                except ProviderError as exc:
                    last = exc
                    if not exc.retryable or attempt == self.retry_attempts - 1:
                        raise
                    delay = self.backoff_base * (2**attempt)
                    self.sleeper(delay + self.rng.uniform(0, delay * 0.1))
        raise ProviderError(f"exhausted retries: {last}")

    def complete_text(self, model: ModelRef, req: GenerationRequest) -> str:
        """Plain text completion (used for judge calls)."""
        payload, _ = self._complete(model, req)
        return payload["content"]

    def generate(self, model: ModelRef, req: GenerationRequest) -> ModelResponse:
        """Candidate generation with spec extraction and one repair re-ask."""
        payload, latency = self._complete(model, req)
        raw = payload["content"]
        usage = payload.get("usage")
        spec, prose, error = extract_spec(raw)
        if spec is not None:
            return ModelResponse(
                viz_spec=spec,
                nl_text=prose,
                raw_output=raw,
                latency_ms=latency,
                token_usage=usage,
                parse_status="ok",
            )
        repair_req = GenerationRequest(
            system_prompt=req.system_prompt,
            messages=req.messages
            + (("assistant", raw), ("user", REPAIR_INSTRUCTION)),
            output_schema=req.output_schema,
            temperature=req.temperature,
            max_tokens=req.max_tokens,
            seed=req.seed,
        )
        try:
            payload2, latency2 = self._complete(model, repair_req)
        except (ProviderError, ConfigurationError):
            payload2, latency2 = None, 0.0
        if payload2 is not None:
            raw2 = payload2["content"]
            spec2, prose2, _ = extract_spec(raw2)
            if spec2 is not None:
                return ModelResponse(
                    viz_spec=spec2,
                    nl_text=prose2,
                    raw_output=raw2,
                    latency_ms=latency + latency2,
                    token_usage=payload2.get("usage"),
                    parse_status="repaired",
                )
        return ModelResponse(
            viz_spec=None,
            nl_text=prose,
            raw_output=raw,
            latency_ms=latency,
            token_usage=usage,
            parse_status="failed",
        )


class JudgeViaGateway:
    """Adapter giving nl-metrics judge calls the gateway's admission control."""

    def __init__(self, gateway: Gateway, model: ModelRef, temperature: float = 0.0):
        self.gateway = gateway
        self.model = model
        self.temperature = temperature

    def complete(self, prompt: str) -> str:
        req = GenerationRequest(
            system_prompt="You are a strict, consistent evaluation judge.",
            messages=(("user", prompt),),
            temperature=self.temperature,
            seed=0,
        )
        return self.gateway.complete_text(self.model, req)
