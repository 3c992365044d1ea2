"""Automated decision-rule search over cross-domain validation tasks.

Starting from an initial rule, the loop repeatedly shows the model the best
rules found so far (ordered by accuracy, ascending) plus worked examples, asks
for a new rule, scores it on the validation tasks, and keeps it only if it
strictly beats the best score. The run stops after a fixed iteration budget or
after too many consecutive non-improvements, and returns the top K rules for
majority-vote inference.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .analysis import PromptRegistry
from .corpus import Verdict
from .errors import (
    CorruptCheckpointError,
    DuplicateProposalError,
    EmptyLedgerError,
    EmptyProposalError,
    ProviderError,
)
from .judge import DecisionRule, JudgeConfig, RuleOrigin, score_rule
from .providers import ChatRequest, Provider, RoleTag, temperature_for
from .seeding import substream
from .tasks import ValidationTask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LedgerEntry:
    rule: DecisionRule
    accuracy: float


class RuleLedger:
    """Insertion-ordered <rule, accuracy> pairs; only strict improvements enter.

    After the initial entry the accuracies are therefore strictly increasing,
    and the best pair is always the last one.
    """

    def __init__(self, entries: Sequence[LedgerEntry] = ()):
        self._entries: list[LedgerEntry] = []
        for entry in entries:
            self.insert(entry.rule, entry.accuracy)

    def insert(self, rule: DecisionRule, accuracy: float) -> LedgerEntry:
        if self._entries and accuracy <= self._entries[-1].accuracy:
            raise ValueError(
                f"ledger accuracies must strictly increase: {accuracy} after {self._entries[-1].accuracy}"
            )
        entry = LedgerEntry(rule=rule, accuracy=accuracy)
        self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    @property
    def best(self) -> LedgerEntry:
        if not self._entries:
            raise EmptyLedgerError("ledger is empty")
        return self._entries[-1]

    @property
    def texts(self) -> set[str]:
        return {entry.rule.text for entry in self._entries}

    def top(self, k: int) -> list[LedgerEntry]:
        """Best k pairs, highest accuracy first; all pairs when fewer exist."""
        return sorted(self._entries, key=lambda e: e.accuracy, reverse=True)[:k]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)


@dataclass(frozen=True)
class OptimizerConfig:
    n_iter_max: int = 500
    n_att_max: int = 10
    k: int = 3
    trajectory_size: int = 10
    exemplar_count: int = 3
    duplicate_retries: int = 3

    def __post_init__(self):
        if self.n_iter_max <= 0 or self.n_att_max <= 0 or self.k <= 0:
            raise ValueError("n_iter_max, n_att_max, and k must be positive")
        if self.trajectory_size <= 0 or self.exemplar_count < 0 or self.duplicate_retries < 0:
            raise ValueError("bad optimizer config")


def build_trajectory(ledger: RuleLedger, size: int = 10) -> list[LedgerEntry]:
    """The pairs shown to the optimizer: top `size` by accuracy, ascending.

    Ties rank the later insertion higher, so the freshest of equal rules
    survives the cut and sits later in the prompt.
    """
    entries = ledger.entries
    if not entries:
        raise EmptyLedgerError("cannot build a trajectory from an empty ledger")
    ranked = sorted(range(len(entries)), key=lambda i: (entries[i].accuracy, i))
    kept = ranked[-size:] if size < len(ranked) else ranked
    return [entries[i] for i in kept]


def render_trajectory(entries: Sequence[LedgerEntry]) -> str:
    return "\n".join(f"<{entry.rule.text}, {entry.accuracy:.2%}>" for entry in entries)


EXEMPLAR_PREAMBLE = (
    "Below are several examples demonstrating how to apply these decision rules. "
    "In each example, replace <DECISION RULE> with your decision rule, read the "
    "input carefully, and generate an accurate judgment. If the judgment matches "
    "the provided ground-truth label, it is considered correct; otherwise, it is wrong."
)

CLOSING_INSTRUCTION = (
    "Now, design a new decision rule that differs from the existing ones and aim "
    "to maximize its accuracy."
)

_LABEL_WORDS = {Verdict.FAKE: "fake", Verdict.REAL: "real"}


def render_exemplars(exemplars: Sequence[tuple[str, Verdict]]) -> str:
    blocks = [
        f"Input: {content}\n\n<DECISION RULE>\n\nOutput: {_LABEL_WORDS[label]}"
        for content, label in exemplars
    ]
    return "\n\n".join(blocks)


def pick_exemplars(
    tasks: Sequence[ValidationTask], count: int, seed: int
) -> list[tuple[str, Verdict]]:
    """Fixed worked examples for the whole run, drawn from the task queries."""
    if count == 0 or not tasks:
        return []
    rng = substream(seed, "exemplars")
    chosen = rng.sample(list(tasks), min(count, len(tasks)))
    return [(task.query.content, task.gold) for task in chosen]


_RULE_LABELS = ("decision rule:", "new decision rule:", "rule:", "output:")
_QUOTE_PAIRS = [('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’"), ("<", ">"), ("`", "`")]


def clean_rule_text(raw: str) -> str:
    """Strip fences, labels, and wrapping quotes from a proposed rule."""
    text = raw.strip()
    if text.startswith("```"):
        lines = [line for line in text.splitlines() if not line.strip().startswith("```")]
        text = "\n".join(lines).strip()
    lowered = text.casefold()
    for label in _RULE_LABELS:
        if lowered.startswith(label):
            text = text[len(label):].strip()
            lowered = text.casefold()
    changed = True
    while changed and len(text) >= 2:
        changed = False
        for opener, closer in _QUOTE_PAIRS:
            if text.startswith(opener) and text.endswith(closer):
                text = text[len(opener):-len(closer)].strip()
                changed = True
    return text


def propose_rule(
    trajectory: Sequence[LedgerEntry],
    exemplars: Sequence[tuple[str, Verdict]],
    provider: Provider,
    system_prompt: str,
    existing_texts: set[str] | None = None,
    max_tokens: int = 2048,
    temperatures: Mapping[RoleTag, float] | None = None,
) -> str:
    """One optimizer call: trajectory and exemplars in, a cleaned rule text out."""
    parts = [render_trajectory(trajectory)]
    if exemplars:
        parts.append(EXEMPLAR_PREAMBLE)
        parts.append(render_exemplars(exemplars))
    parts.append(CLOSING_INSTRUCTION)
    request = ChatRequest(
        role=RoleTag.OPTIMIZER,
        system_prompt=system_prompt,
        user_content="\n\n".join(parts),
        temperature=temperature_for(RoleTag.OPTIMIZER, temperatures),
        max_tokens=max_tokens,
    )
    text = clean_rule_text(provider.complete(request).text)
    if not text:
        raise EmptyProposalError("optimizer returned an empty rule")
    if existing_texts and text in existing_texts:
        raise DuplicateProposalError(text)
    return text


def sequence_proposer(texts: Sequence[str]) -> Callable[[Sequence[LedgerEntry]], str]:
    """Scripted proposal source for tests; raises StopIteration when drained."""
    iterator = iter(list(texts))

    def next_proposal(trajectory: Sequence[LedgerEntry]) -> str:
        return next(iterator)

    return next_proposal


# ---------------------------------------------------------------- state


@dataclass
class OptimizerState:
    """Everything needed to resume a run: counters, ledger, iteration trace."""

    ledger: RuleLedger = field(default_factory=RuleLedger)
    n_iter: int = 0
    n_att: int = 0
    next_rule_id: int = 0
    trace: list[dict] = field(default_factory=list)


def save_checkpoint(state: OptimizerState, path: str | os.PathLike) -> None:
    """Atomic write: the file is either the previous or the new checkpoint."""
    body = json.dumps(
        {
            "n_iter": state.n_iter,
            "n_att": state.n_att,
            "next_rule_id": state.next_rule_id,
            "ledger": [
                {
                    "id": entry.rule.id,
                    "text": entry.rule.text,
                    "origin": entry.rule.origin.value,
                    "accuracy": entry.accuracy,
                }
                for entry in state.ledger
            ],
            "trace": state.trace,
        },
        ensure_ascii=False,
        sort_keys=True,
    )
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(body)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_checkpoint(path: str | os.PathLike) -> OptimizerState:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        ledger = RuleLedger(
            LedgerEntry(
                rule=DecisionRule(id=rec["id"], text=rec["text"], origin=RuleOrigin(rec["origin"])),
                accuracy=rec["accuracy"],
            )
            for rec in data["ledger"]
        )
        return OptimizerState(
            ledger=ledger,
            n_iter=data["n_iter"],
            n_att=data["n_att"],
            next_rule_id=data["next_rule_id"],
            trace=list(data.get("trace", [])),
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"cannot load checkpoint {path}: {exc}") from exc


# ---------------------------------------------------------------- main loop


@dataclass(frozen=True)
class OptimizeResult:
    rules: tuple[DecisionRule, ...]
    pairs: tuple[LedgerEntry, ...]
    ledger: RuleLedger
    state: OptimizerState


Scorer = Callable[[DecisionRule], float]
Proposer = Callable[[Sequence[LedgerEntry]], str]


def optimize(
    initial_rule_text: str,
    tasks: Sequence[ValidationTask],
    config: OptimizerConfig = OptimizerConfig(),
    provider: Provider | None = None,
    registry: PromptRegistry | None = None,
    judge_config: JudgeConfig = JudgeConfig(),
    seed: int = 0,
    workers: int = 1,
    checkpoint_path: str | os.PathLike | None = None,
    resume_state: OptimizerState | None = None,
    scorer: Scorer | None = None,
    proposer: Proposer | None = None,
    judgement_sink: Callable[[dict], None] | None = None,
) -> OptimizeResult:
    """Run the rule search and return the top K pairs.

    `scorer` and `proposer` default to task-set scoring through the judge and
    prompt-template proposal through the provider; tests inject scripted ones.
    A scripted proposer signals it is drained by raising StopIteration, which
    ends the run cleanly. Provider failures checkpoint the state (when a path
    is given) before propagating. When the final ledger holds fewer than K
    rules, all of them are returned with a warning.
    """
    if scorer is None or proposer is None:
        if provider is None:
            raise ValueError("provider is required unless both scorer and proposer are injected")
        registry = registry or PromptRegistry.load()
    if scorer is None:
        judge_prompt = registry.template_for(RoleTag.JUDGE)

        def scorer(rule: DecisionRule) -> float:
            return score_rule(rule, tasks, provider, judge_prompt, judge_config,
                              workers=workers, sink=judgement_sink)

    if proposer is None:
        optimizer_prompt = registry.template_for(RoleTag.OPTIMIZER)
        exemplars = pick_exemplars(tasks, config.exemplar_count, seed)

        def proposer(trajectory: Sequence[LedgerEntry]) -> str:
            return propose_rule(trajectory, exemplars, provider, optimizer_prompt,
                                max_tokens=judge_config.max_tokens)

    def checkpoint(state: OptimizerState) -> None:
        if checkpoint_path is not None:
            save_checkpoint(state, checkpoint_path)

    if resume_state is not None and len(resume_state.ledger) > 0:
        state = resume_state
    else:
        # A checkpoint can predate the initial score (the very first scorer
        # call failed); resuming one starts over from the initial rule.
        state = resume_state or OptimizerState()
        initial = DecisionRule(id=0, text=initial_rule_text, origin=RuleOrigin.MANUAL)
        state.next_rule_id = 1
        try:
            s0 = scorer(initial)
        except ProviderError:
            checkpoint(state)
            raise
        state.ledger.insert(initial, s0)
        state.trace.append(
            {"iteration": 0, "rule_id": 0, "text": initial.text, "accuracy": s0,
             "improved": True, "n_att": 0, "s_max": s0}
        )
        checkpoint(state)

    while state.n_iter < config.n_iter_max and state.n_att < config.n_att_max:
        state.n_iter += 1
        trajectory = build_trajectory(state.ledger, config.trajectory_size)

        text: str | None = None
        try:
            for _ in range(config.duplicate_retries + 1):
                try:
                    candidate = proposer(trajectory)
                except DuplicateProposalError as exc:
                    log.info("iteration %d: duplicate proposal %r", state.n_iter, str(exc)[:60])
                    continue
                if candidate in state.ledger.texts:
                    log.info("iteration %d: duplicate proposal %r", state.n_iter, candidate[:60])
                    continue
                text = candidate
                break
        except StopIteration:
            state.n_iter -= 1
            log.info("proposal source exhausted after %d iterations", state.n_iter)
            break
        except ProviderError:
            state.n_iter -= 1
            checkpoint(state)
            raise

        if text is None:
            # Nothing new after the duplicate retries: a failed attempt.
            state.n_att += 1
            state.trace.append(
                {"iteration": state.n_iter, "rule_id": None, "text": None, "accuracy": None,
                 "improved": False, "n_att": state.n_att, "s_max": state.ledger.best.accuracy,
                 "duplicate": True}
            )
            checkpoint(state)
            continue

        rule = DecisionRule(id=state.next_rule_id, text=text, origin=RuleOrigin.OPTIMIZED)
        state.next_rule_id += 1
        try:
            accuracy = scorer(rule)
        except ProviderError:
            state.n_iter -= 1
            state.next_rule_id -= 1
            checkpoint(state)
            raise

        improved = accuracy > state.ledger.best.accuracy
        if improved:
            state.ledger.insert(rule, accuracy)
            state.n_att = 0
        else:
            state.n_att += 1
        state.trace.append(
            {"iteration": state.n_iter, "rule_id": rule.id, "text": rule.text,
             "accuracy": accuracy, "improved": improved, "n_att": state.n_att,
             "s_max": state.ledger.best.accuracy}
        )
        checkpoint(state)

    pairs = state.ledger.top(config.k)
    if len(pairs) < config.k:
        log.warning("ledger holds %d rules, fewer than k=%d; returning all", len(pairs), config.k)
    return OptimizeResult(
        rules=tuple(entry.rule for entry in pairs),
        pairs=tuple(pairs),
        ledger=state.ledger,
        state=state,
    )


def default_initial_rule() -> str:
    """The packaged starting rule; a plain default meant to be tuned per corpus."""
    from importlib import resources

    return resources.files(__package__).joinpath("prompts/initial_rule.txt").read_text(encoding="utf-8").strip()
