"""Pluggable inference backend for enhancement and merge verification.

Two backends sit behind one ``infer`` interface: a deterministic rule
engine (the default; CI never needs credentials) and an HTTP chat client
for an LLM endpoint.  Both return the same schema-validated verdict shape.
The surrounding pipeline treats every verdict as advisory: structural
validators re-check anything a backend proposes.

LLM responses that fail schema validation are retried and then downgraded
to the rule-engine answer, with the downgrade recorded in the verdict's
``backend`` field.  Any chain-of-thought text is stored verbatim for audit
but never parsed for decisions.

All verdicts are cached by the hash of the request's canonical (sorted-key)
serialization, in memory and optionally on disk.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .errors import BackendUnavailableError, SchemaViolationError
from .evalexpr import first_satisfying

REASON_CODES = (
    "control-flow-conflict",
    "data-flow-conflict",
    "condition-conflict",
    "unreachable-path",
    "missing-call-link",
)

PROMPT_DIR = Path(__file__).parent / "prompts"


class RequestKind(Enum):
    ENHANCE_PROPOSAL = "enhance-proposal"
    MERGE_VERDICT = "merge-verdict"
    PARAM_SIMULATION = "param-simulation"


@dataclass(frozen=True)
class ReasonerRequest:
    kind: RequestKind
    payload: dict
    budget: int = 512

    def canonical(self) -> str:
        return json.dumps(
            {"kind": self.kind.value, "payload": self.payload,
             "budget": self.budget},
            sort_keys=True, separators=(",", ":"),
        )

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def bindable_names(self) -> set[str]:
        names = set(self.payload.get("variables", {}))
        names |= set(self.payload.get("bindable", []))
        return names


@dataclass
class ReasonerVerdict:
    decision: str                  # "accept" | "reject"
    reasons: list[str] = field(default_factory=list)
    bindings: dict = field(default_factory=dict)
    raw_trace: str = ""
    backend: str = "rule-engine"

    @property
    def accepted(self) -> bool:
        return self.decision == "accept"

    def to_dict(self) -> dict:
        return {"decision": self.decision, "reasons": self.reasons,
                "bindings": self.bindings, "raw_trace": self.raw_trace,
                "backend": self.backend}

    @classmethod
    def from_dict(cls, data: dict) -> "ReasonerVerdict":
        return cls(decision=data["decision"], reasons=list(data["reasons"]),
                   bindings=dict(data["bindings"]),
                   raw_trace=data.get("raw_trace", ""),
                   backend=data.get("backend", "rule-engine"))


def validate_verdict(verdict: ReasonerVerdict, request: ReasonerRequest) -> None:
    """Schema gate applied to every backend answer."""
    if verdict.decision not in ("accept", "reject"):
        raise SchemaViolationError(f"bad decision {verdict.decision!r}")
    if verdict.decision == "reject" and not verdict.reasons:
        raise SchemaViolationError("reject verdict must carry reasons")
    for reason in verdict.reasons:
        if reason not in REASON_CODES:
            raise SchemaViolationError(f"unknown reason code {reason!r}")
    allowed = request.bindable_names()
    for name in verdict.bindings:
        if name not in allowed:
            raise SchemaViolationError(
                f"binding for {name!r} not named by the request")


# ---------------------------------------------------------------------------
# Rule engine
# ---------------------------------------------------------------------------

class RuleEngine:
    """Deterministic backend: finite-domain evaluation plus structural rules."""

    name = "rule-engine"

    def infer(self, request: ReasonerRequest) -> ReasonerVerdict:
        if request.kind is RequestKind.PARAM_SIMULATION:
            return self._param_simulation(request)
        if request.kind is RequestKind.MERGE_VERDICT:
            return self._merge_verdict(request)
        return self._enhance_proposal(request)

    def _param_simulation(self, request: ReasonerRequest) -> ReasonerVerdict:
        payload = request.payload
        atoms = [tuple(a[:2]) for a in payload.get("atoms", [])]
        domains = {k: list(v) for k, v in payload.get("variables", {}).items()}
        witness = first_satisfying(atoms, domains)
        if witness is None:
            return ReasonerVerdict("reject", ["condition-conflict"],
                                   backend=self.name)
        bindings = {k: v for k, v in witness.items() if k in domains}
        return ReasonerVerdict("accept", bindings=bindings, backend=self.name)

    def _merge_verdict(self, request: ReasonerRequest) -> ReasonerVerdict:
        payload = request.payload
        reasons: list[str] = []

        brackets = [tuple(b) for b in payload.get("brackets", [])]
        if not _brackets_well_nested(brackets):
            reasons.append("missing-call-link")
        else:
            profile = _depth_profile(brackets, payload.get("n_steps", 0))
            for step, depth in payload.get("events", []):
                if step >= len(profile) or profile[step] != depth:
                    reasons.append("missing-call-link")
                    break

        for use_step, def_step in payload.get("uses", []):
            if def_step >= use_step:
                reasons.append("data-flow-conflict")
                break

        atoms = [tuple(a[:2]) for a in payload.get("atoms", [])]
        domains = {k: list(v) for k, v in payload.get("variables", {}).items()}
        witness = first_satisfying(atoms, domains)
        bindings: dict = {}
        if witness is None:
            cross = {tuple(a[:2]) for a in payload.get("atoms", [])
                     if len(a) > 2 and a[2]}
            reasons.append("data-flow-conflict" if cross else "condition-conflict")
        else:
            bindings = {k: v for k, v in witness.items() if k in domains}

        if reasons:
            return ReasonerVerdict("reject", sorted(set(reasons)),
                                   backend=self.name)
        return ReasonerVerdict("accept", bindings=bindings, backend=self.name)

    def _enhance_proposal(self, request: ReasonerRequest) -> ReasonerVerdict:
        payload = request.payload
        op = payload.get("op")
        if op == "insert-call":
            slots = payload.get("slots", [])
            if not slots:
                return ReasonerVerdict("reject", ["missing-call-link"],
                                       backend=self.name)
            hint = payload.get("source_hint")
            position = hint if hint in slots else slots[0]
            return ReasonerVerdict("accept", bindings={"position": position},
                                   backend=self.name)
        # resolve-dynamic / log-flow audits: structurally prechecked upstream.
        return ReasonerVerdict("accept", backend=self.name)


def _brackets_well_nested(brackets: list[tuple]) -> bool:
    for enter, leave, _depth in brackets:
        if enter >= leave:
            return False
    for a in brackets:
        for b in brackets:
            if a is b:
                continue
            # overlap without containment breaks the call-stack discipline
            if a[0] < b[0] < a[1] < b[1]:
                return False
    return True


def _depth_profile(brackets: list[tuple], n_steps: int) -> list[int]:
    profile = [0] * n_steps
    for enter, leave, _depth in brackets:
        for i in range(enter + 1, min(leave, n_steps)):
            profile[i] += 1
    return profile


# ---------------------------------------------------------------------------
# LLM chat backend
# ---------------------------------------------------------------------------

@dataclass
class LlmSettings:
    endpoint: str
    model: str
    credential_env: str = "LOGSYNTH_API_KEY"
    max_retries: int = 2
    timeout: float = 30.0
    fallback_to_rules: bool = True


class LlmClient:
    """Provider-agnostic chat-completions client with strict output schema."""

    name = "llm"

    def __init__(self, settings: LlmSettings):
        self.settings = settings
        self._rules = RuleEngine()

    def _prompt_for(self, kind: RequestKind) -> str:
        path = PROMPT_DIR / f"{kind.value.replace('-', '_')}_v1.md"
        return path.read_text(encoding="utf-8")

    def _post(self, request: ReasonerRequest) -> str:
        credential = os.environ.get(self.settings.credential_env)
        if not credential:
            raise BackendUnavailableError(
                f"credential env var {self.settings.credential_env} not set")
        body = json.dumps({
            "model": self.settings.model,
            "temperature": 0,
            "max_tokens": request.budget,
            "messages": [
                {"role": "system", "content": self._prompt_for(request.kind)},
                {"role": "user", "content": request.canonical()},
            ],
        }).encode("utf-8")
        req = urllib.request.Request(
            self.settings.endpoint, data=body,
            headers={"Content-Type": "application/json",
                     "Authorization": f"Bearer {credential}"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.settings.timeout) as resp:
                data = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise BackendUnavailableError(str(exc)) from exc
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise SchemaViolationError(f"malformed completion payload: {exc}")

    def infer(self, request: ReasonerRequest) -> ReasonerVerdict:
        last_error: Optional[Exception] = None
        for _attempt in range(self.settings.max_retries + 1):
            try:
                content = self._post(request)
                parsed = json.loads(content)
                verdict = ReasonerVerdict(
                    decision=parsed.get("decision", ""),
                    reasons=list(parsed.get("reasons", [])),
                    bindings=dict(parsed.get("bindings", {})),
                    raw_trace=str(parsed.get("trace", "")),
                    backend=self.name,
                )
                validate_verdict(verdict, request)
                return verdict
            except BackendUnavailableError:
                raise
            except (SchemaViolationError, json.JSONDecodeError, ValueError,
                    TypeError) as exc:
                last_error = exc
        if self.settings.fallback_to_rules:
            verdict = self._rules.infer(request)
            verdict.backend = "llm-fallback"
            return verdict
        raise SchemaViolationError(
            f"no schema-valid response after retries: {last_error}")


# ---------------------------------------------------------------------------
# Facade: cache, rate limiting, backend selection
# ---------------------------------------------------------------------------

class TokenBucket:
    def __init__(self, rate_per_sec: Optional[float], capacity: int = 10):
        self.rate = rate_per_sec
        self.capacity = capacity
        self.tokens = float(capacity)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        if self.rate is None:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity,
                                  self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


class Reasoner:
    """Cached, rate-limited front door to the selected backend."""

    def __init__(self, backend=None, cache_dir=None,
                 rate_per_sec: Optional[float] = None,
                 max_concurrency: int = 4):
        self.backend = backend or RuleEngine()
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._memory: dict[str, ReasonerVerdict] = {}
        self._lock = threading.Lock()
        self._bucket = TokenBucket(rate_per_sec)
        self._slots = threading.Semaphore(max_concurrency)
        self.cache_hits = 0
        self.requests = 0

    def infer(self, request: ReasonerRequest) -> ReasonerVerdict:
        key = request.digest()
        with self._lock:
            self.requests += 1
            cached = self._memory.get(key)
        if cached is None and self.cache_dir:
            disk = self.cache_dir / f"{key}.json"
            if disk.exists():
                cached = ReasonerVerdict.from_dict(
                    json.loads(disk.read_text(encoding="utf-8")))
                with self._lock:
                    self._memory[key] = cached
        if cached is not None:
            with self._lock:
                self.cache_hits += 1
            return cached

        self._bucket.acquire()
        with self._slots:
            verdict = self.backend.infer(request)
        validate_verdict(verdict, request)
        with self._lock:
            self._memory[key] = verdict
        if self.cache_dir:
            tmp = self.cache_dir / f".{key}.tmp"
            tmp.write_text(json.dumps(verdict.to_dict(), sort_keys=True),
                           encoding="utf-8")
            os.replace(tmp, self.cache_dir / f"{key}.json")
        return verdict
