"""Run configuration: one JSON file drives every pipeline stage.

The resolved config is hashed (sha256 over its canonical JSON) and that hash
is embedded in every artifact a run writes, together with the seed and the
prompt-file hashes, so artifacts can always be traced back to the exact
settings that produced them.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

from .analysis import AnalysisConfig, PromptRegistry
from .corpus import Verdict
from .errors import ProviderError
from .evidence import (
    EvidenceConfig,
    HTTPEncyclopediaBackend,
    HTTPSearchBackend,
    FixtureEncyclopediaBackend,
    FixtureSearchBackend,
    Retriever,
)
from .judge import JudgeConfig
from .optimizer import OptimizerConfig, default_initial_rule
from .providers import (
    CachingProvider,
    HTTPProvider,
    Provider,
    RecordingProvider,
    RetryPolicy,
    provider_from_file,
)
from .tasks import TaskSetConfig


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "mock"
    script: str | None = None
    base_url: str = ""
    model: str = ""
    credential_env: str = "NEWSJURY_API_KEY"
    timeout: float = 60.0
    retry_attempts: int = 3
    cache_dir: str | None = None
    cache_optimizer: bool = False
    record_to: str | None = None

    def __post_init__(self):
        if self.kind not in ("mock", "live"):
            raise ValueError(f"provider kind must be 'mock' or 'live', got {self.kind!r}")


@dataclass(frozen=True)
class EvidenceSettings:
    search_fixtures: str | None = None
    wiki_fixtures: str | None = None
    search_endpoint: str | None = None
    wiki_endpoint: str | None = None
    results_per_query: int = 3
    max_encyclopedia: int = 2
    char_budget: int = 6000

    def config(self) -> EvidenceConfig:
        return EvidenceConfig(
            results_per_query=self.results_per_query,
            max_encyclopedia=self.max_encyclopedia,
            char_budget=self.char_budget,
        )

    def retriever(self) -> Retriever:
        search_backend = None
        if self.search_fixtures:
            search_backend = FixtureSearchBackend(self.search_fixtures)
        elif self.search_endpoint:
            search_backend = HTTPSearchBackend(self.search_endpoint)
        wiki_backend = None
        if self.wiki_fixtures:
            wiki_backend = FixtureEncyclopediaBackend(self.wiki_fixtures)
        elif self.wiki_endpoint:
            wiki_backend = HTTPEncyclopediaBackend(self.wiki_endpoint)
        return Retriever(search_backend=search_backend, encyclopedia_backend=wiki_backend)


@dataclass(frozen=True)
class TaskSettings:
    n_tasks: int = 8
    demos_per_task: int = 4
    per_domain_cap: int | None = None

    def config(self, seed: int) -> TaskSetConfig:
        return TaskSetConfig(
            n_tasks=self.n_tasks,
            demos_per_task=self.demos_per_task,
            seed=seed,
            per_domain_cap=self.per_domain_cap,
        )


@dataclass(frozen=True)
class JudgeSettings:
    tie_break: int = 1
    keywords: dict | None = None

    def config(self) -> JudgeConfig:
        table = None
        if self.keywords is not None:
            table = {word: Verdict(int(code)) for word, code in self.keywords.items()}
        return JudgeConfig(tie_break=Verdict(self.tie_break), keywords=table)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    prompt_dir: str | None = None
    initial_rule: str | None = None
    skip_optimization: bool = False
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    evidence: EvidenceSettings = field(default_factory=EvidenceSettings)
    tasks: TaskSettings = field(default_factory=TaskSettings)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    judge: JudgeSettings = field(default_factory=JudgeSettings)

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    _SECTIONS = {
        "provider": ProviderSettings,
        "evidence": EvidenceSettings,
        "tasks": TaskSettings,
        "optimizer": OptimizerConfig,
        "analysis": AnalysisConfig,
        "judge": JudgeSettings,
    }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs: dict = {}
        for key, value in data.items():
            if key in cls._SECTIONS:
                section = cls._SECTIONS[key]
                if not isinstance(value, dict):
                    raise ValueError(f"config section {key!r} must be an object")
                kwargs[key] = section(**value)
            elif key in ("seed", "workers", "prompt_dir", "initial_rule", "skip_optimization"):
                kwargs[key] = value
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **overrides) -> "RunConfig":
        data = asdict(self)
        for key, value in overrides.items():
            if value is None:
                continue
            if "." in key:
                section, leaf = key.split(".", 1)
                data[section][leaf] = value
            else:
                data[key] = value
        return RunConfig.from_dict(data)

    def config_hash(self) -> str:
        """Digest of every setting that can change an artifact.

        Execution knobs that cannot affect outputs (worker count, transcript
        recording, the response cache) stay out, so a resumed run may change
        them without tripping the compatibility check.
        """
        payload = asdict(self)
        payload.pop("workers", None)
        payload["provider"].pop("record_to", None)
        payload["provider"].pop("cache_dir", None)
        canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False, default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def registry(self) -> PromptRegistry:
        return PromptRegistry.load(self.prompt_dir)

    def initial_rule_text(self) -> str:
        if self.initial_rule:
            return self.initial_rule
        return default_initial_rule()

    def provenance(self) -> dict:
        return {
            "config_hash": self.config_hash(),
            "seed": self.seed,
            "prompt_hashes": self.registry().hashes(),
        }

    def build_provider(self) -> Provider:
        settings = self.provider
        if settings.kind == "mock":
            if not settings.script:
                raise ProviderError("mock provider needs a script path (provider.script or --provider mock:<path>)")
            base: Provider = provider_from_file(settings.script)
        else:
            if not settings.base_url or not settings.model:
                raise ProviderError("live provider needs provider.base_url and provider.model")
            base = HTTPProvider(
                base_url=settings.base_url,
                model=settings.model,
                credential_env=settings.credential_env,
                timeout=settings.timeout,
                retry=RetryPolicy(attempts=settings.retry_attempts),
            )
        if settings.record_to:
            base = RecordingProvider(base, settings.record_to)
        if settings.cache_dir:
            base = CachingProvider(
                base,
                settings.cache_dir,
                cache_optimizer=settings.cache_optimizer,
                run_nonce=str(self.seed),
            )
        return base
