"""Scoring detections and running held-out-domain evaluation protocols.

Fake is the positive class everywhere. Both the fake-class F1 and the macro F1
are reported, since published comparisons use either convention.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .analysis import MultiDimReport, PromptRegistry
from .corpus import Dataset, NewsItem, Verdict
from .errors import (
    CrossDomainLeakError,
    EmptyPredictionsError,
    LengthMismatchError,
    MissingReportError,
    NoUsableVerdictsError,
    SingleDomainError,
)
from .judge import DecisionRule, JudgeConfig, RuleOrigin, infer, score_rule
from .optimizer import OptimizerConfig, OptimizeResult, optimize
from .providers import Provider, RoleTag
from .seeding import substream
from .tasks import TaskSetConfig, build_tasks, sample_demos

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    f1_fake: float
    f1_macro: float
    n: int
    confusion: Confusion

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_fake": self.f1_fake,
            "f1_macro": self.f1_macro,
            "n": self.n,
            "confusion": {"tp": self.confusion.tp, "fp": self.confusion.fp,
                          "fn": self.confusion.fn, "tn": self.confusion.tn},
        }


def _f1(precision_num: int, precision_den: int, recall_num: int, recall_den: int) -> float:
    precision = precision_num / precision_den if precision_den else 0.0
    recall = recall_num / recall_den if recall_den else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(preds: Sequence[Verdict | int], golds: Sequence[Verdict | int]) -> EvalMetrics:
    """Accuracy, fake-class F1, and macro F1 with fake as the positive class.

    Zero-support classes contribute an F1 of 0 rather than dividing by zero.
    """
    if len(preds) != len(golds):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise EmptyPredictionsError("no predictions to score")
    tp = fp = fn = tn = 0
    for pred, gold in zip(preds, golds):
        p, g = int(pred), int(gold)
        if p == 1 and g == 1:
            tp += 1
        elif p == 1 and g == 0:
            fp += 1
        elif p == 0 and g == 1:
            fn += 1
        else:
            tn += 1
    n = len(preds)
    f1_fake = _f1(tp, tp + fp, tp, tp + fn)
    f1_real = _f1(tn, tn + fn, tn, tn + fp)
    return EvalMetrics(
        accuracy=(tp + tn) / n,
        f1_fake=f1_fake,
        f1_macro=(f1_fake + f1_real) / 2.0,
        n=n,
        confusion=Confusion(tp=tp, fp=fp, fn=fn, tn=tn),
    )


def evaluate_target(
    target: Dataset,
    reports: Mapping[str, MultiDimReport],
    demo_pool: Sequence[NewsItem],
    rules: Sequence[DecisionRule],
    provider: Provider,
    system_prompt: str,
    judge_config: JudgeConfig = JudgeConfig(),
    demos_per_task: int = 4,
    seed: int = 0,
    sink: Callable[[dict], None] | None = None,
) -> EvalMetrics:
    """Majority-vote inference over every target item, scored against gold.

    Refuses to run if any demo-pool item shares a target domain. An item whose
    vote yields no usable verdict falls back to the tie-break default and is
    logged as such.
    """
    target_domains = set(target.domains)
    for item in demo_pool:
        if item.domain in target_domains:
            raise CrossDomainLeakError(
                f"demo pool item {item.id} belongs to held-out domain {item.domain!r}"
            )
    preds: list[Verdict] = []
    golds: list[Verdict] = []
    for item in target.items:
        report = reports.get(item.id)
        if report is None:
            raise MissingReportError(f"no analysis report for target item {item.id!r}")
        demos = sample_demos(demo_pool, demos_per_task, substream(seed, f"eval-demos:{item.id}"))
        fallback = False
        try:
            verdict, judgements = infer(item, report, demos, rules, provider, system_prompt, judge_config)
        except NoUsableVerdictsError:
            verdict, judgements = judge_config.tie_break, []
            fallback = True
            log.warning("item %s: no usable verdicts; falling back to %s", item.id, verdict.name)
        preds.append(verdict)
        golds.append(item.label)
        if sink is not None:
            sink(
                {
                    "item_id": item.id,
                    "domain": item.domain,
                    "pred": int(verdict),
                    "gold": int(item.label),
                    "correct": verdict == item.label,
                    "fallback": fallback,
                    "votes": [None if j.verdict is None else int(j.verdict) for j in judgements],
                }
            )
    return compute_metrics(preds, golds)


@dataclass(frozen=True)
class FoldResult:
    domain: str
    metrics: EvalMetrics
    optimize_result: OptimizeResult | None
    rules: tuple[DecisionRule, ...] = ()


@dataclass(frozen=True)
class LodoResult:
    """Per-domain metrics plus their unweighted averages."""

    folds: tuple[FoldResult, ...]

    @property
    def per_domain(self) -> dict[str, EvalMetrics]:
        return {fold.domain: fold.metrics for fold in self.folds}

    @property
    def averages(self) -> dict[str, float]:
        n = len(self.folds)
        return {
            "accuracy": sum(f.metrics.accuracy for f in self.folds) / n,
            "f1_fake": sum(f.metrics.f1_fake for f in self.folds) / n,
            "f1_macro": sum(f.metrics.f1_macro for f in self.folds) / n,
        }


def leave_one_domain_out(
    parts: Mapping[str, Dataset],
    reports: Mapping[str, MultiDimReport],
    initial_rule_text: str,
    task_config: TaskSetConfig,
    optimizer_config: OptimizerConfig,
    provider: Provider,
    registry: PromptRegistry | None = None,
    judge_config: JudgeConfig = JudgeConfig(),
    workers: int = 1,
    on_fold: Callable[[FoldResult], None] | None = None,
    judgement_sink: Callable[[dict], None] | None = None,
    eval_sink: Callable[[dict], None] | None = None,
    skip_optimization: bool = False,
) -> LodoResult:
    """Hold out each domain in turn: optimize rules on the rest, evaluate on it.

    `on_fold` fires as each fold finishes so partial results can be persisted
    before the full protocol completes.  With `skip_optimization` the search is
    bypassed and every fold judges with the initial rule alone.
    """
    if len(parts) < 2:
        raise SingleDomainError(f"leave-one-domain-out needs at least 2 domains, got {len(parts)}")
    registry = registry or PromptRegistry.load()
    judge_prompt = registry.template_for(RoleTag.JUDGE)
    folds: list[FoldResult] = []
    for target_domain in sorted(parts):
        sources = {domain: part for domain, part in parts.items() if domain != target_domain}
        if skip_optimization:
            result = None
            rules: tuple[DecisionRule, ...] = (
                DecisionRule(id=0, text=initial_rule_text, origin=RuleOrigin.MANUAL),
            )
        else:
            tasks = build_tasks(sources, reports, task_config)
            result = optimize(
                initial_rule_text,
                tasks,
                optimizer_config,
                provider,
                registry=registry,
                judge_config=judge_config,
                seed=task_config.seed,
                workers=workers,
                judgement_sink=judgement_sink,
            )
            rules = result.rules
        demo_pool = [item for part in sources.values() for item in part.items]
        metrics = evaluate_target(
            parts[target_domain],
            reports,
            demo_pool,
            rules,
            provider,
            judge_prompt,
            judge_config,
            demos_per_task=task_config.demos_per_task,
            seed=task_config.seed,
            sink=eval_sink,
        )
        fold = FoldResult(domain=target_domain, metrics=metrics, optimize_result=result, rules=rules)
        folds.append(fold)
        if on_fold is not None:
            on_fold(fold)
        log.info("fold %s: accuracy %.4f f1_fake %.4f", target_domain, metrics.accuracy, metrics.f1_fake)
    return LodoResult(folds=tuple(folds))


def _split_folds(parts: Mapping[str, Dataset], n_folds: int) -> list[dict[str, Dataset]]:
    """Round-robin each domain's items into n_folds buckets, by position."""
    buckets: list[dict[str, list[NewsItem]]] = [dict() for _ in range(n_folds)]
    for domain in sorted(parts):
        for index, item in enumerate(parts[domain].items):
            buckets[index % n_folds].setdefault(domain, []).append(item)
    return [
        {domain: Dataset(name=f"fold{i}/{domain}", items=tuple(items)) for domain, items in bucket.items()}
        for i, bucket in enumerate(buckets)
    ]


def sweep_task_counts(
    parts: Mapping[str, Dataset],
    reports: Mapping[str, MultiDimReport],
    candidates: Sequence[int],
    initial_rule_text: str,
    task_config: TaskSetConfig,
    optimizer_config: OptimizerConfig,
    provider: Provider,
    registry: PromptRegistry | None = None,
    judge_config: JudgeConfig = JudgeConfig(),
    n_folds: int = 4,
    val_n_tasks: int | None = None,
    workers: int = 1,
) -> dict:
    """Grid-search the validation task count by cross-validation over folds.

    For each candidate count and each fold, rules are optimized on tasks built
    from the other folds and the best rule is scored on tasks built from the
    held fold. Returns mean held-fold accuracy per candidate and the argmax.
    """
    if not candidates:
        raise ValueError("no candidate task counts to sweep")
    registry = registry or PromptRegistry.load()
    judge_prompt = registry.template_for(RoleTag.JUDGE)
    folds = _split_folds(parts, n_folds)
    val_count = val_n_tasks or max(candidates)
    scores: dict[int, float] = {}
    for candidate in candidates:
        fold_scores: list[float] = []
        for fold_index in range(n_folds):
            train_parts: dict[str, list[NewsItem]] = {}
            for other_index, fold in enumerate(folds):
                if other_index == fold_index:
                    continue
                for domain, part in fold.items():
                    train_parts.setdefault(domain, []).extend(part.items)
            train = {d: Dataset(name=d, items=tuple(items)) for d, items in train_parts.items()}
            fold_seed = substream(task_config.seed, f"sweep:{candidate}:{fold_index}").getrandbits(63)
            train_tasks = build_tasks(
                train, reports,
                TaskSetConfig(n_tasks=candidate, demos_per_task=task_config.demos_per_task,
                              seed=fold_seed, per_domain_cap=task_config.per_domain_cap),
            )
            result = optimize(
                initial_rule_text, train_tasks, optimizer_config, provider,
                registry=registry, judge_config=judge_config, seed=fold_seed, workers=workers,
            )
            val_tasks = build_tasks(
                folds[fold_index], reports,
                TaskSetConfig(n_tasks=val_count, demos_per_task=task_config.demos_per_task,
                              seed=fold_seed + 1),
            )
            best_rule = result.rules[0]
            fold_scores.append(
                score_rule(best_rule, val_tasks, provider, judge_prompt, judge_config, workers=workers)
            )
        scores[candidate] = sum(fold_scores) / len(fold_scores)
        log.info("n_tasks=%d: mean held-fold accuracy %.4f", candidate, scores[candidate])
    best = max(scores, key=lambda c: (scores[c], -c))
    return {"scores": scores, "best_n_tasks": best}
