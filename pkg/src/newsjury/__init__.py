"""Cross-domain misinformation detection.

Model agents analyze each news item along linguistic, comment, and factual
dimensions, a rule-search loop optimizes decision rules on cross-domain
validation tasks, and a judge classifies new items by majority vote over the
best rules. `CrossDomainDetector` wraps the whole pipeline behind a
scikit-learn estimator interface; the `newsjury` command runs it stage by
stage.
"""

from .analysis import (
    AnalysisConfig,
    AnalysisReport,
    Analyzer,
    MultiDimReport,
    PromptRegistry,
    compose,
)
from .config import RunConfig
from .corpus import Dataset, NewsItem, Verdict, load_dataset, save_dataset, split_by_domain
from .errors import NewsJuryError
from .estimator import CrossDomainDetector, check_news_items
from .evaluation import (
    EvalMetrics,
    compute_metrics,
    evaluate_target,
    leave_one_domain_out,
    sweep_task_counts,
)
from .evidence import Clue, EvidenceSet, Retriever, gather_evidence
from .judge import (
    DecisionRule,
    Judgement,
    JudgeConfig,
    OUTPUT_FORMAT,
    infer,
    majority_vote,
    parse_verdict,
    score_rule,
)
from .optimizer import (
    OptimizeResult,
    OptimizerConfig,
    RuleLedger,
    build_trajectory,
    default_initial_rule,
    optimize,
)
from .providers import (
    ChatRequest,
    ChatResponse,
    HTTPProvider,
    Provider,
    RoleTag,
    ScriptedProvider,
    ScriptEntry,
    TranscriptReplayProvider,
    provider_from_file,
)
from .tasks import TaskSetConfig, ValidationTask, build_tasks, cap_domain

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "AnalysisReport",
    "Analyzer",
    "ChatRequest",
    "ChatResponse",
    "Clue",
    "CrossDomainDetector",
    "Dataset",
    "DecisionRule",
    "EvalMetrics",
    "EvidenceSet",
    "HTTPProvider",
    "Judgement",
    "JudgeConfig",
    "MultiDimReport",
    "NewsItem",
    "NewsJuryError",
    "OptimizeResult",
    "OptimizerConfig",
    "OUTPUT_FORMAT",
    "PromptRegistry",
    "Provider",
    "Retriever",
    "RoleTag",
    "RuleLedger",
    "RunConfig",
    "ScriptedProvider",
    "ScriptEntry",
    "TaskSetConfig",
    "TranscriptReplayProvider",
    "ValidationTask",
    "Verdict",
    "build_tasks",
    "build_trajectory",
    "cap_domain",
    "check_news_items",
    "compose",
    "compute_metrics",
    "default_initial_rule",
    "evaluate_target",
    "gather_evidence",
    "infer",
    "leave_one_domain_out",
    "load_dataset",
    "majority_vote",
    "optimize",
    "parse_verdict",
    "provider_from_file",
    "save_dataset",
    "score_rule",
    "split_by_domain",
    "sweep_task_counts",
]
