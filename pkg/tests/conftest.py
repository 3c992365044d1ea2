"""Shared fixtures: the bundled corpus and a fully scripted provider.

The script is generated from the corpus so every request the pipeline can
make (analysis, reflection, evidence-backed fact check, rule proposals,
judging any rule against any item) has a deterministic answer.  Matching
conventions:

* every item's content ends with "(ref <id>)", so "(ref h01)" keys requests
  about that story without colliding with demonstration text;
* judge requests are keyed on "(ref <id>)\n\nAnalysis report", which only
  occurs for the item under judgment (demonstrations are followed by a
  "judgment:" line instead);
* rule proposals chain off the trajectory: seeing "Strategy Alpha" in the
  prompt means alpha is already in the ledger, so the mock proposes beta.
"""

from __future__ import annotations

import os

import pytest

from newsjury import (
    Dataset,
    NewsItem,
    ScriptedProvider,
    Verdict,
    load_dataset,
)
from newsjury.evidence import Retriever
from newsjury.optimizer import default_initial_rule
from newsjury.providers import RoleTag, ScriptEntry

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
CORPUS_PATH = os.path.join(FIXTURE_DIR, "mini_corpus.jsonl")
SEARCH_DIR = os.path.join(FIXTURE_DIR, "search")
WIKI_DIR = os.path.join(FIXTURE_DIR, "wiki")

OUTPUT_TAIL = "Output format: judgment: <'1' represents fake-news, '0' represents real-news>"

# Rule texts the mock optimizer proposes, in chain order.  Thresholds say how
# far down each domain (by item ordinal) a rule still judges correctly, which
# makes the correct sets nested: any task subset scores them monotonically.
PROPOSALS = {
    "alpha": "Strategy Alpha: treat unsourced miracle cures, secret-plot framing, or anonymous insider claims as fake (1); measured reports with checkable specifics are real (0). " + OUTPUT_TAIL,
    "beta": "Strategy Beta: weigh attribution first, then whether commenters could verify anything; unverifiable sensational claims are fake (1), corroborated routine reporting is real (0). " + OUTPUT_TAIL,
    "gamma": "Strategy Gamma: require a named institution or record for every load-bearing claim; absence plus urgency means fake (1), presence plus consistency means real (0). " + OUTPUT_TAIL,
    "delta": "Strategy Delta: count exclamation-style urgency cues and call the story fake (1) past two of them, real (0) otherwise. " + OUTPUT_TAIL,
}

RULE_THRESHOLDS = {"r0": 3, "alpha": 6, "beta": 8, "gamma": 10, "delta": 6}

RULE_NEEDLES = {
    "r0": "Decision rule: Judge the news as fake",
    "alpha": "Strategy Alpha",
    "beta": "Strategy Beta",
    "gamma": "Strategy Gamma",
    "delta": "Strategy Delta",
}


def ordinal_of(item_id: str) -> int:
    return int(item_id[1:])


def scripted_verdict(rule_key: str, item: NewsItem) -> Verdict:
    """What the mock judge says for this (rule, item) pair."""
    if ordinal_of(item.id) <= RULE_THRESHOLDS[rule_key]:
        return item.label
    return Verdict(1 - int(item.label))


def fact_questions_for(item: NewsItem) -> list[str]:
    return [
        f"Has the central claim in the story tagged (ref {item.id}) been confirmed by an independent source?",
        f"What do official records say about the story tagged (ref {item.id})?",
    ]


def _analysis_bodies(item: NewsItem) -> dict[RoleTag, str]:
    tag = f"the story tagged (ref {item.id})"
    if item.label is Verdict.FAKE:
        return {
            RoleTag.LINGUISTIC: f"The wording of {tag} leans on urgency and miracle framing with no attribution.",
            RoleTag.COMMENT: f"Commenters on {tag} ask for sources and report failing to reproduce the claim.",
            RoleTag.FACT_CHECK: f"External evidence for {tag} is thin; its strongest claims remain unverified.",
        }
    return {
        RoleTag.LINGUISTIC: f"The wording of {tag} is measured, with concrete figures and named institutions.",
        RoleTag.COMMENT: f"Commenters on {tag} broadly corroborate the account from first-hand experience.",
        RoleTag.FACT_CHECK: f"Available evidence lines up with {tag}; official records corroborate the key facts.",
    }


REFLECT_QUESTIONS = (
    "1. Which named source, if any, stands behind the central claim?\n"
    "2. Does the tone escalate beyond what the cited material supports?"
)

REFLECT_ANSWERS = (
    "1. The presence or absence of a named, checkable source stays decisive here.\n"
    "2. The tone matches the strength of the underlying material in this case."
)

SECTION_HEADERS = ("Linguistic Analysis", "Comment Analysis", "Fact Check")
SECTION_ROLES = (RoleTag.LINGUISTIC, RoleTag.COMMENT, RoleTag.FACT_CHECK)


def full_script(dataset: Dataset) -> list[ScriptEntry]:
    """Every entry the pipeline may need, specific matchers declared first."""
    entries: list[ScriptEntry] = []
    for item in dataset.items:
        ref = f"(ref {item.id})"
        bodies = _analysis_bodies(item)
        # Reflection answers must precede the plain analysis entries: their
        # requests contain the ref needle too, and first declared wins.
        for role in SECTION_ROLES:
            entries.append(ScriptEntry.make(role, (ref, "Answer each question"), REFLECT_ANSWERS))
        for header in SECTION_HEADERS:
            entries.append(
                ScriptEntry.make(RoleTag.QUESTIONING, (ref, f"{header} report"), REFLECT_QUESTIONS)
            )
        entries.append(ScriptEntry.make(RoleTag.LINGUISTIC, ref, bodies[RoleTag.LINGUISTIC]))
        entries.append(ScriptEntry.make(RoleTag.COMMENT, ref, bodies[RoleTag.COMMENT]))
        entries.append(
            ScriptEntry.make(RoleTag.FACT_QUESTION, ref, "\n".join(fact_questions_for(item)))
        )
        entries.append(ScriptEntry.make(RoleTag.FACT_CHECK, ref, bodies[RoleTag.FACT_CHECK]))
        for rule_key, rule_needle in RULE_NEEDLES.items():
            entries.append(
                ScriptEntry.make(
                    RoleTag.JUDGE,
                    (f"{ref}\n\nAnalysis report", rule_needle),
                    f"judgment: {int(scripted_verdict(rule_key, item))}",
                )
            )
    # Most advanced ledger first: seeing gamma means propose delta, and so on.
    entries.append(ScriptEntry.make(RoleTag.OPTIMIZER, "Strategy Gamma", PROPOSALS["delta"]))
    entries.append(ScriptEntry.make(RoleTag.OPTIMIZER, "Strategy Beta", PROPOSALS["gamma"]))
    entries.append(ScriptEntry.make(RoleTag.OPTIMIZER, "Strategy Alpha", PROPOSALS["beta"]))
    entries.append(ScriptEntry.make(RoleTag.OPTIMIZER, (), PROPOSALS["alpha"]))
    return entries


@pytest.fixture(scope="session")
def corpus() -> Dataset:
    return load_dataset(CORPUS_PATH)


@pytest.fixture(scope="session")
def fixture_retriever() -> Retriever:
    return Retriever.from_fixtures(SEARCH_DIR, WIKI_DIR)


@pytest.fixture()
def mock_provider(corpus) -> ScriptedProvider:
    return ScriptedProvider(full_script(corpus))


@pytest.fixture(scope="session")
def initial_rule_text() -> str:
    return default_initial_rule()


def make_item(
    item_id: str = "x1",
    content: str | None = None,
    label: int = 1,
    domain: str = "misc",
    comments: tuple[str, ...] = (),
) -> NewsItem:
    return NewsItem(
        id=item_id,
        content=content if content is not None else f"A story about nothing much. (ref {item_id})",
        label=Verdict(label),
        domain=domain,
        comments=comments,
    )


def make_dataset(name: str = "tiny", *items: NewsItem) -> Dataset:
    return Dataset(name=name, items=tuple(items))
