"""News records, labeled datasets, and line-delimited ingestion.

A dataset is a JSONL file, one news record per line:

    {"id": "w-17", "content": "...", "comments": ["...", ...],
     "label": 1, "domain": "health"}

`id` is optional (a stable `<filename>:<lineno>` id is generated when absent),
`comments` defaults to empty, `label` must be the integer 0 (real) or 1 (fake),
`content` and `domain` are required. Domains are case-folded and trimmed so
"Health" and " health " land in the same partition.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping

from .errors import (
    BadLabelError,
    DuplicateIdError,
    EmptyDatasetError,
    EmptyFileError,
    MissingFieldError,
)


class Verdict(IntEnum):
    """Binary label: 1 marks fake news, 0 marks real news."""

    REAL = 0
    FAKE = 1


def normalize_domain(raw: str) -> str:
    return raw.strip().casefold()


@dataclass(frozen=True)
class NewsItem:
    """One news record with its reader comments and gold label."""

    id: str
    content: str
    label: Verdict
    domain: str
    comments: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.id.strip():
            raise MissingFieldError("news item id must be non-empty")
        if not self.content.strip():
            raise MissingFieldError(f"item {self.id!r}: content is empty")
        if not isinstance(self.label, Verdict):
            object.__setattr__(self, "label", Verdict(self.label))
        normalized = normalize_domain(self.domain)
        if not normalized:
            raise MissingFieldError(f"item {self.id!r}: domain is empty")
        object.__setattr__(self, "domain", normalized)
        object.__setattr__(self, "comments", tuple(self.comments))


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of news items with unique ids."""

    name: str
    items: tuple[NewsItem, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        seen: set[str] = set()
        for item in self.items:
            if item.id in seen:
                raise DuplicateIdError(f"dataset {self.name!r}: duplicate item id {item.id!r}")
            seen.add(item.id)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def domains(self) -> tuple[str, ...]:
        """Distinct domains in first-appearance order."""
        out: list[str] = []
        for item in self.items:
            if item.domain not in out:
                out.append(item.domain)
        return tuple(out)


def _parse_record(record: Mapping, origin: str) -> NewsItem:
    if not isinstance(record, Mapping):
        raise MissingFieldError(f"{origin}: record must be a JSON object")
    for key in ("content", "domain"):
        if key not in record or not str(record[key]).strip():
            raise MissingFieldError(f"{origin}: missing required field {key!r}")
    if "label" not in record:
        raise MissingFieldError(f"{origin}: missing required field 'label'")
    label = record["label"]
    if isinstance(label, bool) or label not in (0, 1):
        raise BadLabelError(f"{origin}: label must be 0 or 1, got {label!r}")
    comments = record.get("comments", [])
    if comments is None:
        comments = []
    if not isinstance(comments, list) or any(not isinstance(c, str) for c in comments):
        raise MissingFieldError(f"{origin}: comments must be an array of strings")
    return NewsItem(
        id=str(record.get("id") or origin),
        content=str(record["content"]),
        label=Verdict(label),
        domain=str(record["domain"]),
        comments=tuple(comments),
    )


def load_dataset(path: str | os.PathLike, name: str | None = None) -> Dataset:
    """Read a JSONL dataset file.

    Raises EmptyFileError when no records are present, MissingFieldError /
    BadLabelError on schema violations (with file and line in the message),
    DuplicateIdError when two records share an id.
    """
    filename = os.path.basename(str(path))
    items: list[NewsItem] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            origin = f"{filename}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MissingFieldError(f"{origin}: invalid JSON ({exc.msg})") from exc
            item = _parse_record(record, origin)
            if item.id in seen:
                raise DuplicateIdError(f"{origin}: duplicate item id {item.id!r}")
            seen.add(item.id)
            items.append(item)
    if not items:
        raise EmptyFileError(f"{filename}: no records")
    return Dataset(name=name or filename, items=tuple(items))


def save_dataset(dataset: Dataset, path: str | os.PathLike) -> None:
    """Write a dataset back to JSONL; load_dataset(save_dataset(d)) == d."""
    with open(path, "w", encoding="utf-8") as fh:
        for item in dataset.items:
            record = {
                "id": item.id,
                "content": item.content,
                "comments": list(item.comments),
                "label": int(item.label),
                "domain": item.domain,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def split_by_domain(dataset: Dataset) -> dict[str, Dataset]:
    """Partition a dataset into one per domain, preserving item order."""
    if not dataset.items:
        raise EmptyDatasetError(f"dataset {dataset.name!r} has no items")
    buckets: dict[str, list[NewsItem]] = {}
    for item in dataset.items:
        buckets.setdefault(item.domain, []).append(item)
    return {
        domain: Dataset(name=f"{dataset.name}/{domain}", items=tuple(bucket))
        for domain, bucket in buckets.items()
    }


def merge_datasets(name: str, parts: Iterable[Dataset]) -> Dataset:
    items: list[NewsItem] = []
    for part in parts:
        items.extend(part.items)
    return Dataset(name=name, items=tuple(items))
