"""Pipeline configuration: defaults, file loading, flag overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .callgraph import DEFAULT_API_PATTERNS
from .errors import ConfigError


@dataclass
class PipelineConfig:
    corpus_paths: list[str] = field(default_factory=list)
    meta_path: Optional[str] = None
    import_graph_path: Optional[str] = None
    api_patterns: list[str] = field(default_factory=lambda: list(DEFAULT_API_PATTERNS))
    entry_threshold: int = 2
    depth_threshold: int = 3
    loop_k: int = 2
    path_budget: int = 10_000
    recursion_reentry_cap: int = 1
    reasoner_backend: str = "rule-engine"     # "rule-engine" | "llm"
    llm_endpoint: str = ""
    llm_model: str = ""
    credential_env: str = "LOGSYNTH_API_KEY"
    rate_per_sec: Optional[float] = None
    max_concurrency: int = 4
    cache_dir: Optional[str] = None
    rules_path: Optional[str] = None
    reference_templates_path: Optional[str] = None
    annotations_path: Optional[str] = None
    review_rate: float = 0.10
    out_dir: str = "out"
    seed: int = 7

    def validate(self) -> None:
        if not self.corpus_paths and not self.import_graph_path:
            raise ConfigError("no corpus paths or import graph configured")
        for path in self.corpus_paths:
            if not Path(path).exists():
                raise ConfigError(f"corpus path does not exist: {path}")
        if self.entry_threshold < 1:
            raise ConfigError("entry_threshold must be >= 1")
        if self.depth_threshold < 0:
            raise ConfigError("depth_threshold must be >= 0")
        if self.loop_k < 1:
            raise ConfigError("loop_k must be >= 1")
        if self.path_budget < 1:
            raise ConfigError("path_budget must be >= 1")
        if not 0 < self.review_rate <= 1:
            raise ConfigError("review_rate must be in (0, 1]")
        if self.reasoner_backend not in ("rule-engine", "llm"):
            raise ConfigError(f"unknown backend {self.reasoner_backend!r}")
        if self.reasoner_backend == "llm" and not self.llm_endpoint:
            raise ConfigError("llm backend requires an endpoint")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of the analysis-relevant parameters (I/O locations excluded,
        so the same analysis in a different directory hashes identically)."""
        data = self.to_dict()
        for key in ("out_dir", "cache_dir"):
            data.pop(key, None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
