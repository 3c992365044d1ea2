"""Multi-dimensional news analysis by role-specific model agents.

Three report sections can be produced for an item: a linguistic one (emotional
polarity, writing style), a comment one (commenter stances, fact hints), and a
fact one (yes/no fact questions, retrieved evidence, consistency check). Each
completed section goes through one question-reflection round: a questioning
agent poses follow-up questions and the originating agent answers them. The
sections compose deterministically into a single report used downstream by
the judge.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Mapping

from .errors import (
    AllSectionsFailedError,
    AnalysisError,
    NoCommentsError,
    NoSectionsError,
    ProviderError,
    UnparsableQuestionsError,
)
from .corpus import NewsItem
from .evidence import EvidenceConfig, EvidenceSet, Retriever, gather_evidence, render_evidence
from .providers import ChatRequest, Provider, RoleTag, temperature_for

log = logging.getLogger(__name__)


class SectionKind(str, Enum):
    LINGUISTIC = "linguistic"
    COMMENT = "comment"
    FACT = "fact"


SECTION_ORDER = (SectionKind.LINGUISTIC, SectionKind.COMMENT, SectionKind.FACT)
SECTION_HEADERS = {
    SectionKind.LINGUISTIC: "Linguistic Analysis",
    SectionKind.COMMENT: "Comment Analysis",
    SectionKind.FACT: "Fact Check",
}
# Reflection answers come from the agent that wrote the section.
SECTION_ROLES = {
    SectionKind.LINGUISTIC: RoleTag.LINGUISTIC,
    SectionKind.COMMENT: RoleTag.COMMENT,
    SectionKind.FACT: RoleTag.FACT_CHECK,
}


@dataclass(frozen=True)
class PromptRegistry:
    """System prompts per agent role, hot-swappable via a prompt directory.

    The five analysis-side roles must always be present and non-empty. When a
    directory is given, those five files are required in it; judge and
    optimizer prompts may fall back to the packaged defaults.
    """

    templates: Mapping[RoleTag, str]

    ANALYSIS_ROLES = (
        RoleTag.LINGUISTIC,
        RoleTag.COMMENT,
        RoleTag.FACT_QUESTION,
        RoleTag.FACT_CHECK,
        RoleTag.QUESTIONING,
    )

    def __post_init__(self):
        object.__setattr__(self, "templates", dict(self.templates))
        for role in self.ANALYSIS_ROLES:
            if not self.templates.get(role, "").strip():
                raise AnalysisError(f"prompt registry is missing the {role.value} template")

    def template_for(self, role: RoleTag) -> str:
        try:
            return self.templates[role]
        except KeyError:
            raise AnalysisError(f"no template for role {role.value}") from None

    def hashes(self) -> dict[str, str]:
        """Per-role content digests, embedded in artifacts for provenance."""
        return {
            role.value: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for role, text in sorted(self.templates.items(), key=lambda kv: kv[0].value)
        }

    @classmethod
    def load(cls, directory: str | os.PathLike | None = None) -> "PromptRegistry":
        templates: dict[RoleTag, str] = {}
        packaged = resources.files(__package__).joinpath("prompts")
        for role in RoleTag:
            filename = role.value + ".txt"
            if directory is not None:
                path = os.path.join(str(directory), filename)
                if os.path.exists(path):
                    with open(path, encoding="utf-8") as fh:
                        templates[role] = fh.read().strip()
                    continue
                if role in cls.ANALYSIS_ROLES:
                    raise AnalysisError(f"prompt directory {directory} is missing {filename}")
            packaged_file = packaged.joinpath(filename)
            if packaged_file.is_file():
                templates[role] = packaged_file.read_text(encoding="utf-8").strip()
        return cls(templates=templates)


@dataclass(frozen=True)
class AnalysisReport:
    """One section: its body plus the reflection question/answer pairs."""

    kind: SectionKind
    body: str
    reflection_questions: tuple[str, ...] = ()
    reflection_answers: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.body.strip():
            raise AnalysisError(f"{self.kind.value} report body is empty")
        object.__setattr__(self, "reflection_questions", tuple(self.reflection_questions))
        object.__setattr__(self, "reflection_answers", tuple(self.reflection_answers))
        if len(self.reflection_questions) != len(self.reflection_answers):
            raise AnalysisError(
                f"{self.kind.value} report has {len(self.reflection_questions)} questions "
                f"but {len(self.reflection_answers)} answers"
            )


@dataclass(frozen=True)
class MultiDimReport:
    item_id: str
    sections: tuple[AnalysisReport, ...]
    composed_text: str

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        if not 1 <= len(self.sections) <= len(SECTION_ORDER):
            raise NoSectionsError(f"report for {self.item_id} has {len(self.sections)} sections")
        kinds = [s.kind for s in self.sections]
        if len(set(kinds)) != len(kinds):
            raise AnalysisError(f"report for {self.item_id} repeats a section kind")


@dataclass(frozen=True)
class AnalysisConfig:
    comment_cap: int = 50
    fact_question_cap: int = 5
    reflection_question_cap: int = 3
    reflection_rounds: int = 1
    max_tokens: int = 2048
    temperatures: Mapping[RoleTag, float] | None = None

    def __post_init__(self):
        if self.reflection_rounds < 0:
            raise ValueError("reflection_rounds must be >= 0")
        for cap in (self.comment_cap, self.fact_question_cap, self.reflection_question_cap):
            if cap <= 0:
                raise ValueError("caps must be positive")


# ---------------------------------------------------------------- parsing

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]+|\(?\d{1,2}\s*[.):]|[QqAa]\d{1,2}\s*[.:)])\s*")
_BLOCK_MARKER = re.compile(r"^\s*(?:\(?\d{1,2}\s*[.):]|[Aa](?:nswer)?\s*\d{1,2}\s*[.:)])\s*")


def parse_question_list(text: str, cap: int) -> list[str]:
    """One question per non-empty line, list markers stripped, capped."""
    questions: list[str] = []
    for line in text.splitlines():
        stripped = _LIST_MARKER.sub("", line).strip()
        if stripped:
            questions.append(stripped)
        if len(questions) >= cap:
            break
    return questions


def split_numbered_blocks(text: str) -> list[str]:
    """Split a response into numbered blocks; unnumbered text is one block."""
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        if _BLOCK_MARKER.match(line):
            current = [_BLOCK_MARKER.sub("", line).strip()]
            blocks.append(current)
        elif current is not None:
            current.append(line.rstrip())
    if not blocks:
        stripped = text.strip()
        return [stripped] if stripped else []
    return ["\n".join(block).strip() for block in blocks]


def enumerate_comments(comments: tuple[str, ...], cap: int) -> str:
    lines = [f"{i}. {comment}" for i, comment in enumerate(comments[:cap], 1)]
    omitted = len(comments) - cap
    if omitted > 0:
        lines.append(f"[{omitted} more comments omitted]")
    return "\n".join(lines)


# ---------------------------------------------------------------- composition


def compose(item_id: str, sections: list[AnalysisReport]) -> MultiDimReport:
    """Stitch completed sections into one report, fixed order and template.

    The output is a pure function of the inputs: same sections, same text.
    """
    if not sections:
        raise NoSectionsError(f"no completed sections for {item_id}")
    ordered = sorted(sections, key=lambda s: SECTION_ORDER.index(s.kind))
    blocks = []
    for section in ordered:
        lines = [f"=== {SECTION_HEADERS[section.kind]} ===", section.body]
        if section.reflection_questions:
            lines.append("")
            lines.append("Follow-up review:")
            for i, (question, answer) in enumerate(
                zip(section.reflection_questions, section.reflection_answers), 1
            ):
                lines.append(f"Q{i}: {question}")
                lines.append(f"A{i}: {answer}")
        blocks.append("\n".join(lines))
    return MultiDimReport(item_id=item_id, sections=tuple(ordered), composed_text="\n\n".join(blocks))


# ---------------------------------------------------------------- archive

_ARCHIVE_META_KIND = "report-archive"


def report_to_record(report: MultiDimReport) -> dict:
    return {
        "item_id": report.item_id,
        "sections": [
            {
                "kind": section.kind.value,
                "body": section.body,
                "questions": list(section.reflection_questions),
                "answers": list(section.reflection_answers),
            }
            for section in report.sections
        ],
        "composed_text": report.composed_text,
    }


def report_from_record(record: Mapping) -> MultiDimReport:
    sections = tuple(
        AnalysisReport(
            kind=SectionKind(section["kind"]),
            body=section["body"],
            reflection_questions=tuple(section.get("questions", ())),
            reflection_answers=tuple(section.get("answers", ())),
        )
        for section in record["sections"]
    )
    return MultiDimReport(
        item_id=record["item_id"], sections=sections, composed_text=record["composed_text"]
    )


def save_report_archive(
    reports: Mapping[str, MultiDimReport],
    order: list[str],
    path: str | os.PathLike,
    provenance: Mapping | None = None,
) -> None:
    """Write reports as JSONL in the given item order, meta line first."""
    meta: dict = {"kind": _ARCHIVE_META_KIND}
    if provenance:
        meta["provenance"] = dict(provenance)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(meta, ensure_ascii=False, sort_keys=True) + "\n")
        for item_id in order:
            if item_id in reports:
                record = report_to_record(reports[item_id])
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_report_archive(path: str | os.PathLike) -> tuple[dict[str, MultiDimReport], dict]:
    """Read an archive back into a reports-by-id map plus its meta line."""
    reports: dict[str, MultiDimReport] = {}
    meta: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("kind") == _ARCHIVE_META_KIND:
                meta = record
                continue
            report = report_from_record(record)
            reports[report.item_id] = report
    return reports, meta


# ---------------------------------------------------------------- analyzer


class Analyzer:
    """Runs the agent calls for one item and assembles its report."""

    def __init__(
        self,
        provider: Provider,
        registry: PromptRegistry | None = None,
        retriever: Retriever | None = None,
        config: AnalysisConfig = AnalysisConfig(),
        evidence_config: EvidenceConfig = EvidenceConfig(),
    ):
        self.provider = provider
        self.registry = registry or PromptRegistry.load()
        self.retriever = retriever or Retriever()
        self.config = config
        self.evidence_config = evidence_config

    def _ask(self, role: RoleTag, user_content: str) -> str:
        request = ChatRequest(
            role=role,
            system_prompt=self.registry.template_for(role),
            user_content=user_content,
            temperature=temperature_for(role, self.config.temperatures),
            max_tokens=self.config.max_tokens,
        )
        return self.provider.complete(request).text

    # -- section agents

    def analyze_linguistic(self, item: NewsItem) -> AnalysisReport:
        """Emotional polarity and writing style; the request carries the news text only."""
        body = self._ask(RoleTag.LINGUISTIC, item.content)
        return AnalysisReport(kind=SectionKind.LINGUISTIC, body=body)

    def analyze_comments(self, item: NewsItem) -> AnalysisReport:
        if not item.comments:
            raise NoCommentsError(f"item {item.id} has no comments")
        user = f"News:\n{item.content}\n\nComments:\n{enumerate_comments(item.comments, self.config.comment_cap)}"
        body = self._ask(RoleTag.COMMENT, user)
        return AnalysisReport(kind=SectionKind.COMMENT, body=body)

    def generate_fact_questions(self, item: NewsItem) -> list[str]:
        """Yes/no questions about the item's checkable statements."""
        text = self._ask(RoleTag.FACT_QUESTION, item.content)
        questions = parse_question_list(text, cap=self.config.fact_question_cap)
        if text.strip() and not questions:
            raise UnparsableQuestionsError(f"no questions parsed for item {item.id}")
        return questions

    def check_facts(self, item: NewsItem, evidence: EvidenceSet) -> AnalysisReport:
        user = f"News:\n{item.content}\n\nEvidence:\n{render_evidence(evidence)}"
        body = self._ask(RoleTag.FACT_CHECK, user)
        return AnalysisReport(kind=SectionKind.FACT, body=body)

    # -- reflection round

    def _context_block(self, kind: SectionKind, item: NewsItem, evidence: EvidenceSet | None) -> str:
        if kind is SectionKind.COMMENT:
            return f"\n\nComments:\n{enumerate_comments(item.comments, self.config.comment_cap)}"
        if kind is SectionKind.FACT:
            rendered = render_evidence(evidence) if evidence is not None else render_evidence(EvidenceSet(item.id))
            return f"\n\nEvidence:\n{rendered}"
        return ""

    def reflect(self, item: NewsItem, report: AnalysisReport, evidence: EvidenceSet | None = None) -> list[str]:
        """Ask the questioning agent for follow-ups on one section. Zero questions is fine."""
        cap = self.config.reflection_question_cap
        user = (
            f"News:\n{item.content}"
            f"{self._context_block(report.kind, item, evidence)}"
            f"\n\n{SECTION_HEADERS[report.kind]} report:\n{report.body}"
            f"\n\nPose up to {cap} targeted questions, one per line."
        )
        return parse_question_list(self._ask(RoleTag.QUESTIONING, user), cap=cap)

    def respond_to_reflection(
        self,
        item: NewsItem,
        report: AnalysisReport,
        questions: list[str],
        evidence: EvidenceSet | None = None,
    ) -> list[str]:
        """Have the originating agent answer the follow-ups, one answer per question."""
        numbered = "\n".join(f"{i}. {q}" for i, q in enumerate(questions, 1))
        user = (
            f"News:\n{item.content}"
            f"{self._context_block(report.kind, item, evidence)}"
            f"\n\nYour previous {SECTION_HEADERS[report.kind]} report:\n{report.body}"
            f"\n\nAnswer each question below by its number:\n{numbered}"
        )
        text = self._ask(SECTION_ROLES[report.kind], user)
        blocks = split_numbered_blocks(text)
        if len(blocks) >= len(questions):
            return blocks[: len(questions)]
        # Could not split one answer per question: keep the whole response as
        # the first answer so nothing the agent said is lost.
        log.warning(
            "item %s: expected %d answers for the %s section, parsed %d; storing response as answer 1",
            item.id, len(questions), report.kind.value, len(blocks),
        )
        return [text.strip()] + [""] * (len(questions) - 1)

    def _reflected(self, item: NewsItem, report: AnalysisReport, evidence: EvidenceSet | None) -> AnalysisReport:
        questions_acc: list[str] = []
        answers_acc: list[str] = []
        for _ in range(self.config.reflection_rounds):
            questions = self.reflect(item, report, evidence)
            if not questions:
                break
            answers = self.respond_to_reflection(item, report, questions, evidence)
            questions_acc.extend(questions)
            answers_acc.extend(answers)
        if not questions_acc:
            return report
        return AnalysisReport(
            kind=report.kind,
            body=report.body,
            reflection_questions=tuple(questions_acc),
            reflection_answers=tuple(answers_acc),
        )

    # -- orchestration

    def analyze_full(self, item: NewsItem) -> MultiDimReport:
        """All applicable sections plus reflection, composed into one report.

        A failing section is dropped with a warning; only when nothing at all
        completes is AllSectionsFailedError raised.
        """
        sections: list[AnalysisReport] = []

        try:
            sections.append(self._reflected(item, self.analyze_linguistic(item), None))
        except (ProviderError, AnalysisError) as exc:
            log.warning("item %s: linguistic section failed: %s", item.id, exc)

        if item.comments:
            try:
                sections.append(self._reflected(item, self.analyze_comments(item), None))
            except (ProviderError, AnalysisError) as exc:
                log.warning("item %s: comment section failed: %s", item.id, exc)

        try:
            try:
                questions = self.generate_fact_questions(item)
            except UnparsableQuestionsError as exc:
                log.warning("item %s: %s; checking facts without search queries", item.id, exc)
                questions = []
            evidence = gather_evidence(
                item.id, item.content, questions, self.retriever, self.evidence_config
            )
            sections.append(self._reflected(item, self.check_facts(item, evidence), evidence))
        except (ProviderError, AnalysisError) as exc:
            log.warning("item %s: fact section failed: %s", item.id, exc)

        if not sections:
            raise AllSectionsFailedError(f"no analysis section completed for item {item.id}")
        return compose(item.id, sections)
