"""Cross-domain validation tasks for scoring decision rules.

A task asks the judge to classify one analyzed news item given a few labeled
demonstration items. Demonstrations always come from domains other than the
query's, so a rule can only score well by generalizing across domains rather
than memorizing domain quirks.
"""

from __future__ import annotations

import json
import logging
import os
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .analysis import MultiDimReport
from .corpus import Dataset, NewsItem, Verdict
from .errors import (
    CrossDomainLeakError,
    MissingReportError,
    NotEnoughDemosError,
    SingleDomainError,
    TaskBuildError,
)
from .seeding import substream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaskSetConfig:
    n_tasks: int
    demos_per_task: int = 4
    seed: int = 0
    per_domain_cap: int | None = None

    def __post_init__(self):
        if self.n_tasks <= 0:
            raise ValueError("n_tasks must be positive")
        if self.demos_per_task <= 0:
            raise ValueError("demos_per_task must be positive")
        if self.per_domain_cap is not None and self.per_domain_cap <= 0:
            raise ValueError("per_domain_cap must be positive")


@dataclass(frozen=True)
class ValidationTask:
    """One scored query: its report, cross-domain demos, and the gold label."""

    query: NewsItem
    report: MultiDimReport
    demonstrations: tuple[tuple[NewsItem, Verdict], ...]
    gold: Verdict

    def __post_init__(self):
        object.__setattr__(self, "demonstrations", tuple(self.demonstrations))
        for demo, _ in self.demonstrations:
            if demo.domain == self.query.domain:
                raise CrossDomainLeakError(
                    f"demo {demo.id} shares the query domain {self.query.domain!r}"
                )
        if self.gold != self.query.label:
            raise TaskBuildError(f"task gold {self.gold} disagrees with query label {self.query.label}")
        if self.report.item_id != self.query.id:
            raise TaskBuildError(f"task report belongs to {self.report.item_id}, not {self.query.id}")


def cap_domain(dataset: Dataset, cap: int, rng: random.Random) -> Dataset:
    """Uniform sample without replacement down to cap items, input order kept."""
    if len(dataset.items) <= cap:
        return dataset
    chosen = set(rng.sample(range(len(dataset.items)), cap))
    return Dataset(
        name=dataset.name,
        items=tuple(item for i, item in enumerate(dataset.items) if i in chosen),
    )


def sample_demos(
    pool: Sequence[NewsItem], count: int, rng: random.Random
) -> tuple[tuple[NewsItem, Verdict], ...]:
    """Uniform demo sample, label-balanced when the pool permits.

    Aims for half fake / half real (extra slot to real on odd counts); when one
    label is short, the other fills in. Order is shuffled so position carries
    no label signal.
    """
    if len(pool) < count:
        raise NotEnoughDemosError(f"need {count} demos, pool has {len(pool)}")
    fakes = [it for it in pool if it.label == Verdict.FAKE]
    reals = [it for it in pool if it.label == Verdict.REAL]
    want_fake = min(count // 2, len(fakes))
    want_real = min(count - want_fake, len(reals))
    want_fake = min(count - want_real, len(fakes))
    picked = rng.sample(reals, want_real) + rng.sample(fakes, want_fake)
    rng.shuffle(picked)
    return tuple((item, item.label) for item in picked)


def build_tasks(
    parts: Mapping[str, Dataset],
    reports: Mapping[str, MultiDimReport],
    config: TaskSetConfig,
) -> list[ValidationTask]:
    """Round-robin queries over sorted domains with cross-domain demos.

    Queries are drawn without replacement inside each domain; an exhausted
    domain falls back to replacement with a warning. Fully deterministic for a
    given config seed.
    """
    domains = sorted(parts)
    if len(domains) < 2:
        raise SingleDomainError(f"need at least 2 source domains, got {len(domains)}")

    capped: dict[str, list[NewsItem]] = {}
    for domain in domains:
        part = parts[domain]
        if config.per_domain_cap is not None:
            part = cap_domain(part, config.per_domain_cap, substream(config.seed, f"cap:{domain}"))
        capped[domain] = list(part.items)

    queues = {
        domain: substream(config.seed, f"queries:{domain}").sample(items, len(items))
        for domain, items in capped.items()
    }
    replacement_rng = {domain: substream(config.seed, f"queries-replacement:{domain}") for domain in domains}
    exhausted_warned: set[str] = set()
    demo_rng = substream(config.seed, "demos")

    tasks: list[ValidationTask] = []
    for index in range(config.n_tasks):
        domain = domains[index % len(domains)]
        if queues[domain]:
            query = queues[domain].pop(0)
        else:
            if domain not in exhausted_warned:
                exhausted_warned.add(domain)
                log.warning("domain %r exhausted after %d queries; sampling with replacement", domain, index)
            query = replacement_rng[domain].choice(capped[domain])
        report = reports.get(query.id)
        if report is None:
            raise MissingReportError(f"no analysis report for sampled query {query.id!r}")
        pool = [item for other in domains if other != domain for item in capped[other]]
        demos = sample_demos(pool, config.demos_per_task, demo_rng)
        tasks.append(ValidationTask(query=query, report=report, demonstrations=demos, gold=query.label))
    return tasks


# ---------------------------------------------------------------- archive

_META_KIND = "task-set"


def save_task_archive(
    tasks: Sequence[ValidationTask],
    config: TaskSetConfig,
    path: str | os.PathLike,
    provenance: Mapping | None = None,
) -> None:
    """Write tasks as JSONL: a meta line (seed, config), then one task per line."""
    meta = {
        "kind": _META_KIND,
        "seed": config.seed,
        "config": {
            "n_tasks": config.n_tasks,
            "demos_per_task": config.demos_per_task,
            "per_domain_cap": config.per_domain_cap,
        },
    }
    if provenance:
        meta["provenance"] = dict(provenance)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, ensure_ascii=False, sort_keys=True) + "\n")
        for task in tasks:
            record = {
                "query_id": task.query.id,
                "gold": int(task.gold),
                "demos": [{"id": demo.id, "label": int(label)} for demo, label in task.demonstrations],
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_task_archive(
    path: str | os.PathLike,
    items_by_id: Mapping[str, NewsItem],
    reports: Mapping[str, MultiDimReport],
) -> tuple[list[ValidationTask], dict]:
    """Rebuild tasks from an archive against the corpus it was built from."""
    tasks: list[ValidationTask] = []
    meta: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("kind") == _META_KIND:
                meta = record
                continue
            try:
                query = items_by_id[record["query_id"]]
                demos = []
                for demo_ref in record["demos"]:
                    demo = items_by_id[demo_ref["id"]]
                    if int(demo.label) != demo_ref["label"]:
                        raise TaskBuildError(
                            f"{path}:{lineno}: stored label for demo {demo.id!r} disagrees with corpus"
                        )
                    demos.append((demo, Verdict(demo_ref["label"])))
            except KeyError as exc:
                raise TaskBuildError(f"{path}:{lineno}: unknown item id {exc}") from exc
            report = reports.get(query.id)
            if report is None:
                raise MissingReportError(f"{path}:{lineno}: no report for query {query.id!r}")
            tasks.append(
                ValidationTask(query=query, report=report, demonstrations=tuple(demos), gold=Verdict(record["gold"]))
            )
    return tasks, meta
