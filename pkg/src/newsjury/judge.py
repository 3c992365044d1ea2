"""Judging news items with decision rules and majority voting.

The judge agent sees labeled demonstrations, one decision rule, and the news
item with its analysis report, then must answer in a fixed one-line format.
Model output being what it is, parsing runs in three tiers: the exact format
anchor, then lenient repair (a lone trailing 0/1 or a fake/real keyword), then
failure. Failed parses count as wrong answers wherever accuracy is computed.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

from .analysis import MultiDimReport
from .corpus import NewsItem, Verdict
from .errors import EmptyTaskSetError, NoUsableVerdictsError, ProviderError
from .providers import ChatRequest, Provider, RoleTag, temperature_for
from .tasks import ValidationTask

log = logging.getLogger(__name__)

OUTPUT_FORMAT = "judgment: <'1' represents fake-news, '0' represents real-news>"


class RuleOrigin(str, Enum):
    MANUAL = "manual"
    OPTIMIZED = "optimized"


@dataclass(frozen=True)
class DecisionRule:
    id: int
    text: str
    origin: RuleOrigin = RuleOrigin.MANUAL

    def __post_init__(self):
        if self.id < 0:
            raise ValueError("rule id must be non-negative")
        if not self.text.strip():
            raise ValueError("rule text must be non-empty")


class ParseStatus(str, Enum):
    CLEAN = "clean"
    REPAIRED = "repaired"
    FAILED = "failed"


@dataclass(frozen=True)
class Judgement:
    raw: str
    parse_status: ParseStatus
    verdict: Verdict | None = None

    def __post_init__(self):
        if (self.verdict is None) != (self.parse_status is ParseStatus.FAILED):
            raise ValueError("verdict must be present exactly when parsing did not fail")


DEFAULT_KEYWORDS: Mapping[str, Verdict] = {"fake": Verdict.FAKE, "real": Verdict.REAL}

_ANCHOR = re.compile(r"judgment\s*[:：]\s*[\"'<\[\(]*\s*([01])(?!\d)", re.IGNORECASE)
_TRAILING_PUNCT = ".,;:!?'\"()[]<>*`"


def parse_verdict(raw: str, keywords: Mapping[str, Verdict] | None = None) -> Judgement:
    """Extract a verdict from raw judge output.

    Tier 1 (clean): the last ``judgment: <0|1>`` anchor wins. Tier 2
    (repaired): a lone trailing 0/1 token, else the last occurrence of a
    keyword from the table (default fake/real, case-insensitive). Tier 3:
    failed, no verdict.
    """
    matches = _ANCHOR.findall(raw)
    if matches:
        return Judgement(raw=raw, parse_status=ParseStatus.CLEAN, verdict=Verdict(int(matches[-1])))

    tokens = raw.split()
    if tokens:
        last = tokens[-1].strip(_TRAILING_PUNCT)
        if last in ("0", "1"):
            return Judgement(raw=raw, parse_status=ParseStatus.REPAIRED, verdict=Verdict(int(last)))

    table = DEFAULT_KEYWORDS if keywords is None else keywords
    best: tuple[int, Verdict] | None = None
    for word, verdict in table.items():
        if word.isascii():
            pattern = re.compile(r"\b" + re.escape(word) + r"\b", re.IGNORECASE)
            hits = [m.start() for m in pattern.finditer(raw)]
        else:
            hits = [m.start() for m in re.finditer(re.escape(word), raw)]
        if hits and (best is None or hits[-1] > best[0]):
            best = (hits[-1], verdict)
    if best is not None:
        return Judgement(raw=raw, parse_status=ParseStatus.REPAIRED, verdict=best[1])

    return Judgement(raw=raw, parse_status=ParseStatus.FAILED)


@dataclass(frozen=True)
class JudgeConfig:
    tie_break: Verdict = Verdict.FAKE
    keywords: Mapping[str, Verdict] | None = None
    max_tokens: int = 2048
    temperatures: Mapping[RoleTag, float] | None = None


def build_judge_prompt(
    item: NewsItem,
    report: MultiDimReport,
    demonstrations: Sequence[tuple[NewsItem, Verdict]],
    rule: DecisionRule,
) -> str:
    """Demonstrations, then the rule, then the query, then the format line."""
    blocks = []
    for i, (demo, label) in enumerate(demonstrations, 1):
        blocks.append(f"Example {i}:\nNews: {demo.content}\njudgment: {int(label)}")
    blocks.append(f"Decision rule: {rule.text}")
    blocks.append(f"News: {item.content}\n\nAnalysis report:\n{report.composed_text}")
    blocks.append(f"Answer with exactly one line in the output format: {OUTPUT_FORMAT}")
    return "\n\n".join(blocks)


def judge_one(
    item: NewsItem,
    report: MultiDimReport,
    demonstrations: Sequence[tuple[NewsItem, Verdict]],
    rule: DecisionRule,
    provider: Provider,
    system_prompt: str,
    config: JudgeConfig = JudgeConfig(),
) -> Judgement:
    request = ChatRequest(
        role=RoleTag.JUDGE,
        system_prompt=system_prompt,
        user_content=build_judge_prompt(item, report, demonstrations, rule),
        temperature=temperature_for(RoleTag.JUDGE, config.temperatures),
        max_tokens=config.max_tokens,
    )
    return parse_verdict(provider.complete(request).text, config.keywords)


LogSink = Callable[[dict], None]


def score_rule(
    rule: DecisionRule,
    tasks: Sequence[ValidationTask],
    provider: Provider,
    system_prompt: str,
    config: JudgeConfig = JudgeConfig(),
    workers: int = 1,
    sink: LogSink | None = None,
) -> float:
    """Accuracy of one rule over the validation tasks; failed parses are wrong."""
    if not tasks:
        raise EmptyTaskSetError(f"cannot score rule {rule.id} on an empty task set")

    def run(task: ValidationTask) -> Judgement:
        return judge_one(task.query, task.report, task.demonstrations, rule, provider, system_prompt, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            judgements = list(pool.map(run, tasks))
    else:
        judgements = [run(task) for task in tasks]

    correct = 0
    for index, (task, judgement) in enumerate(zip(tasks, judgements)):
        hit = judgement.verdict == task.gold
        correct += hit
        if sink is not None:
            sink(
                {
                    "task_index": index,
                    "rule_id": rule.id,
                    "query_id": task.query.id,
                    "raw": judgement.raw,
                    "verdict": None if judgement.verdict is None else int(judgement.verdict),
                    "status": judgement.parse_status.value,
                    "gold": int(task.gold),
                    "correct": hit,
                }
            )
    return correct / len(tasks)


def majority_vote(judgements: Sequence[Judgement], tie_break: Verdict = Verdict.FAKE) -> Verdict:
    """Modal verdict over usable judgements; ties go to tie_break."""
    verdicts = [j.verdict for j in judgements if j.verdict is not None]
    if not verdicts:
        raise NoUsableVerdictsError(f"none of the {len(judgements)} judgements parsed to a verdict")
    fake = sum(1 for v in verdicts if v == Verdict.FAKE)
    real = len(verdicts) - fake
    if fake > real:
        return Verdict.FAKE
    if real > fake:
        return Verdict.REAL
    return tie_break


def infer(
    item: NewsItem,
    report: MultiDimReport,
    demonstrations: Sequence[tuple[NewsItem, Verdict]],
    rules: Sequence[DecisionRule],
    provider: Provider,
    system_prompt: str,
    config: JudgeConfig = JudgeConfig(),
) -> tuple[Verdict, list[Judgement]]:
    """One judge call per rule, then a majority vote over the survivors.

    A rule whose call fails upstream is skipped with a warning; the vote runs
    over whatever judgements remain.
    """
    judgements: list[Judgement] = []
    for rule in rules:
        try:
            judgements.append(judge_one(item, report, demonstrations, rule, provider, system_prompt, config))
        except ProviderError as exc:
            log.warning("item %s: judge call for rule %d failed: %s", item.id, rule.id, exc)
    if not judgements:
        raise NoUsableVerdictsError(f"all {len(rules)} judge calls failed for item {item.id}")
    return majority_vote(judgements, tie_break=config.tie_break), judgements
