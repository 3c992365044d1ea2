"""Scikit-learn style front door for the whole pipeline.

``fit`` analyzes the labeled multi-domain training news, builds cross-domain
validation tasks, and optimizes decision rules on them; ``predict`` analyzes
new items and judges each with a majority vote over the learned rules. The
class follows the estimator contract (params stored verbatim in ``__init__``,
learned state in trailing-underscore attributes, ``get_params`` /
``set_params`` / ``clone`` compatible), so it drops into the usual tooling.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .analysis import AnalysisConfig, Analyzer, MultiDimReport, PromptRegistry
from .corpus import Dataset, NewsItem, Verdict, split_by_domain
from .errors import NotEnoughDemosError
from .evaluation import compute_metrics
from .evidence import Retriever
from .judge import JudgeConfig, infer
from .optimizer import OptimizerConfig, default_initial_rule, optimize
from .providers import Provider, RoleTag
from .seeding import substream
from .tasks import TaskSetConfig, build_tasks, sample_demos


def check_news_items(
    X: Iterable, y: Sequence[int] | None = None, require_label: bool = True
) -> list[NewsItem]:
    """Coerce estimator input into news items.

    Accepts a Dataset, a sequence of NewsItem, or a sequence of dicts in the
    corpus record shape. ``y`` (when given) overrides or supplies the labels.
    Items without a label are allowed only when require_label is False; they
    get a placeholder label that nothing downstream reads.
    """
    if isinstance(X, Dataset):
        items = list(X.items)
    else:
        items = []
        for index, row in enumerate(X):
            if isinstance(row, NewsItem):
                items.append(row)
            elif isinstance(row, Mapping):
                label = row.get("label")
                if label is None and (y is None and require_label):
                    raise ValueError(f"X[{index}] has no label and no y was given")
                items.append(
                    NewsItem(
                        id=str(row.get("id") or f"item-{index}"),
                        content=str(row.get("content", "")),
                        label=Verdict(int(label)) if label is not None else Verdict.REAL,
                        domain=str(row.get("domain", "")),
                        comments=tuple(row.get("comments", ()) or ()),
                    )
                )
            else:
                raise TypeError(
                    f"X[{index}] must be a NewsItem or a mapping with content/domain, got {type(row).__name__}"
                )
    if y is not None:
        if len(y) != len(items):
            raise ValueError(f"y has {len(y)} labels for {len(items)} items")
        items = [
            NewsItem(id=it.id, content=it.content, label=Verdict(int(label)),
                     domain=it.domain, comments=it.comments)
            for it, label in zip(items, y)
        ]
    if not items:
        raise ValueError("X is empty")
    return items


class CrossDomainDetector(BaseEstimator):
    """Misinformation detector that learns decision rules from other domains.

    Parameters mirror the pipeline knobs: task sampling (n_tasks,
    demos_per_task, per_domain_cap), rule search (k, n_iter, n_att), and
    analysis depth (reflection_rounds, comment_cap). `provider` is the chat
    model the agents run on and is required at fit time.
    """

    def __init__(
        self,
        provider: Provider | None = None,
        retriever: Retriever | None = None,
        prompt_dir: str | None = None,
        initial_rule: str | None = None,
        n_tasks: int = 8,
        demos_per_task: int = 4,
        per_domain_cap: int | None = None,
        k: int = 3,
        n_iter: int = 20,
        n_att: int = 10,
        trajectory_size: int = 10,
        exemplar_count: int = 3,
        reflection_rounds: int = 1,
        comment_cap: int = 50,
        seed: int = 0,
        workers: int = 1,
    ):
        self.provider = provider
        self.retriever = retriever
        self.prompt_dir = prompt_dir
        self.initial_rule = initial_rule
        self.n_tasks = n_tasks
        self.demos_per_task = demos_per_task
        self.per_domain_cap = per_domain_cap
        self.k = k
        self.n_iter = n_iter
        self.n_att = n_att
        self.trajectory_size = trajectory_size
        self.exemplar_count = exemplar_count
        self.reflection_rounds = reflection_rounds
        self.comment_cap = comment_cap
        self.seed = seed
        self.workers = workers

    # -- internals

    def _analyzer(self) -> Analyzer:
        if self.provider is None:
            raise ValueError("CrossDomainDetector needs a provider; pass one to __init__")
        return Analyzer(
            provider=self.provider,
            registry=PromptRegistry.load(self.prompt_dir),
            retriever=self.retriever,
            config=AnalysisConfig(
                reflection_rounds=self.reflection_rounds, comment_cap=self.comment_cap
            ),
        )

    def _analyze_all(self, analyzer: Analyzer, items: Sequence[NewsItem]) -> dict[str, MultiDimReport]:
        reports: dict[str, MultiDimReport] = {}
        for item in items:
            if item.id not in reports:
                reports[item.id] = analyzer.analyze_full(item)
        return reports

    # -- estimator API

    def fit(self, X, y=None) -> "CrossDomainDetector":
        items = check_news_items(X, y, require_label=True)
        analyzer = self._analyzer()
        dataset = Dataset(name="fit", items=tuple(items))
        parts = split_by_domain(dataset)
        task_config = TaskSetConfig(
            n_tasks=self.n_tasks,
            demos_per_task=self.demos_per_task,
            seed=self.seed,
            per_domain_cap=self.per_domain_cap,
        )
        reports = self._analyze_all(analyzer, items)
        tasks = build_tasks(parts, reports, task_config)
        result = optimize(
            self.initial_rule or default_initial_rule(),
            tasks,
            OptimizerConfig(
                n_iter_max=self.n_iter,
                n_att_max=self.n_att,
                k=self.k,
                trajectory_size=self.trajectory_size,
                exemplar_count=self.exemplar_count,
            ),
            self.provider,
            registry=analyzer.registry,
            seed=self.seed,
            workers=self.workers,
        )
        self.rules_ = result.rules
        self.ledger_ = result.ledger
        self.reports_ = reports
        self.demo_pool_ = tuple(items)
        self.registry_ = analyzer.registry
        self.n_domains_ = len(parts)
        return self

    def _check_fitted(self):
        if not hasattr(self, "rules_"):
            raise NotFittedError("CrossDomainDetector is not fitted; call fit first")

    def predict(self, X) -> np.ndarray:
        """Label codes per item: 1 fake, 0 real."""
        self._check_fitted()
        items = check_news_items(X, require_label=False)
        analyzer = self._analyzer()
        judge_prompt = self.registry_.template_for(RoleTag.JUDGE)
        judge_config = JudgeConfig()
        preds = []
        for item in items:
            report = self.reports_.get(item.id) or analyzer.analyze_full(item)
            pool = [demo for demo in self.demo_pool_ if demo.domain != item.domain]
            try:
                demos = sample_demos(pool, self.demos_per_task, substream(self.seed, f"predict-demos:{item.id}"))
            except NotEnoughDemosError:
                demos = sample_demos(pool, len(pool), substream(self.seed, f"predict-demos:{item.id}"))
            verdict, _ = infer(item, report, demos, self.rules_, self.provider, judge_prompt, judge_config)
            preds.append(int(verdict))
        return np.asarray(preds, dtype=int)

    def score(self, X, y=None) -> float:
        """Accuracy against ``y`` (or the items' own labels when y is None)."""
        items = check_news_items(X, y, require_label=True)
        preds = self.predict(items)
        golds = [int(item.label) for item in items]
        return compute_metrics([Verdict(int(p)) for p in preds], golds).accuracy
