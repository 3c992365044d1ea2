import collections
import json
import random

import pytest

from newsjury import Verdict, split_by_domain
from newsjury.analysis import AnalysisReport, SectionKind, compose
from newsjury.errors import (
    CrossDomainLeakError,
    MissingReportError,
    NotEnoughDemosError,
    SingleDomainError,
    TaskBuildError,
)
from newsjury.seeding import substream
from newsjury.tasks import (
    TaskSetConfig,
    ValidationTask,
    build_tasks,
    cap_domain,
    load_task_archive,
    sample_demos,
    save_task_archive,
)

from conftest import make_dataset, make_item


def stub_report(item):
    return compose(item.id, [AnalysisReport(kind=SectionKind.LINGUISTIC, body=f"notes on {item.id}")])


def reports_for(items):
    return {item.id: stub_report(item) for item in items}


@pytest.fixture(scope="module")
def corpus_parts(corpus):
    return split_by_domain(corpus)


@pytest.fixture(scope="module")
def corpus_reports(corpus):
    return reports_for(corpus.items)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"n_tasks": 0},
        {"n_tasks": 4, "demos_per_task": 0},
        {"n_tasks": 4, "per_domain_cap": 0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            TaskSetConfig(**kwargs)


class TestValidationTask:
    def test_same_domain_demo_rejected(self):
        query = make_item("q", domain="health")
        demo = make_item("d", domain="health")
        with pytest.raises(CrossDomainLeakError):
            ValidationTask(
                query=query,
                report=stub_report(query),
                demonstrations=((demo, demo.label),),
                gold=query.label,
            )

    def test_gold_must_match_label(self):
        query = make_item("q", label=1)
        with pytest.raises(TaskBuildError):
            ValidationTask(query=query, report=stub_report(query), demonstrations=(), gold=Verdict.REAL)

    def test_report_must_belong_to_query(self):
        query = make_item("q")
        other = make_item("other")
        with pytest.raises(TaskBuildError):
            ValidationTask(query=query, report=stub_report(other), demonstrations=(), gold=query.label)


class TestCapDomain:
    def test_no_op_when_under_cap(self):
        ds = make_dataset("d", make_item("a"), make_item("b"))
        assert cap_domain(ds, 5, random.Random(0)) is ds

    def test_sampled_down_order_kept(self):
        items = [make_item(f"i{n}") for n in range(10)]
        ds = make_dataset("d", *items)
        capped = cap_domain(ds, 4, random.Random(0))
        assert len(capped.items) == 4
        positions = [items.index(item) for item in capped.items]
        assert positions == sorted(positions)

    def test_deterministic(self):
        ds = make_dataset("d", *[make_item(f"i{n}") for n in range(10)])
        a = cap_domain(ds, 4, random.Random(7))
        b = cap_domain(ds, 4, random.Random(7))
        assert [i.id for i in a.items] == [i.id for i in b.items]


class TestSampleDemos:
    def pool(self, fakes, reals, domain="other"):
        items = [make_item(f"f{n}", label=1, domain=domain) for n in range(fakes)]
        items += [make_item(f"r{n}", label=0, domain=domain) for n in range(reals)]
        return items

    def test_balanced_when_possible(self):
        demos = sample_demos(self.pool(5, 5), 4, random.Random(0))
        labels = collections.Counter(int(label) for _, label in demos)
        assert labels == {0: 2, 1: 2}

    def test_odd_count_favors_real(self):
        demos = sample_demos(self.pool(5, 5), 5, random.Random(0))
        labels = collections.Counter(int(label) for _, label in demos)
        assert labels == {0: 3, 1: 2}

    def test_skewed_pool_fills_from_other_label(self):
        demos = sample_demos(self.pool(1, 6), 4, random.Random(0))
        labels = collections.Counter(int(label) for _, label in demos)
        assert labels == {0: 3, 1: 1}
        demos = sample_demos(self.pool(6, 1), 4, random.Random(0))
        labels = collections.Counter(int(label) for _, label in demos)
        assert labels == {0: 1, 1: 3}

    def test_insufficient_pool(self):
        with pytest.raises(NotEnoughDemosError):
            sample_demos(self.pool(1, 1), 4, random.Random(0))

    def test_always_exactly_count(self):
        rng = random.Random(42)
        for _ in range(300):
            fakes = rng.randrange(0, 8)
            reals = rng.randrange(0, 8)
            count = rng.randrange(1, 7)
            pool = self.pool(fakes, reals)
            if len(pool) < count:
                continue
            demos = sample_demos(pool, count, rng)
            assert len(demos) == count
            assert len({item.id for item, _ in demos}) == count
            # as balanced as the pool allows
            n_fake = sum(int(label) for _, label in demos)
            n_real = count - n_fake
            ideal_fake = min(count // 2, fakes)
            assert n_fake >= ideal_fake or n_real == reals

    def test_labels_travel_with_items(self):
        demos = sample_demos(self.pool(3, 3), 4, random.Random(1))
        assert all(label == item.label for item, label in demos)


class TestBuildTasks:
    def config(self, **kwargs):
        defaults = dict(n_tasks=9, demos_per_task=4, seed=11)
        defaults.update(kwargs)
        return TaskSetConfig(**defaults)

    def test_round_robin_over_sorted_domains(self, corpus_parts, corpus_reports):
        tasks = build_tasks(corpus_parts, corpus_reports, self.config(n_tasks=7))
        sequence = [t.query.domain for t in tasks]
        assert sequence == ["health", "sports", "tech", "health", "sports", "tech", "health"]

    def test_demos_never_share_query_domain(self, corpus_parts, corpus_reports):
        tasks = build_tasks(corpus_parts, corpus_reports, self.config())
        for task in tasks:
            assert all(demo.domain != task.query.domain for demo, _ in task.demonstrations)

    def test_gold_and_report_fidelity(self, corpus_parts, corpus_reports):
        tasks = build_tasks(corpus_parts, corpus_reports, self.config())
        for task in tasks:
            assert task.gold == task.query.label
            assert task.report.item_id == task.query.id

    def test_no_repeat_queries_before_exhaustion(self, corpus_parts, corpus_reports):
        tasks = build_tasks(corpus_parts, corpus_reports, self.config(n_tasks=30))
        ids = [t.query.id for t in tasks]
        assert len(set(ids)) == 30

    def test_replacement_fallback_warns(self, corpus_parts, corpus_reports, caplog):
        with caplog.at_level("WARNING"):
            tasks = build_tasks(corpus_parts, corpus_reports, self.config(n_tasks=33))
        assert len(tasks) == 33
        assert any("replacement" in rec.message for rec in caplog.records)

    def test_deterministic_per_seed(self, corpus_parts, corpus_reports):
        def snapshot(seed):
            tasks = build_tasks(corpus_parts, corpus_reports, self.config(seed=seed))
            return [(t.query.id, tuple(d.id for d, _ in t.demonstrations)) for t in tasks]

        assert snapshot(3) == snapshot(3)
        assert snapshot(3) != snapshot(4)

    def test_single_domain_rejected(self, corpus_parts, corpus_reports):
        with pytest.raises(SingleDomainError):
            build_tasks({"health": corpus_parts["health"]}, corpus_reports, self.config())

    def test_missing_report_rejected(self, corpus_parts):
        with pytest.raises(MissingReportError):
            build_tasks(corpus_parts, {}, self.config(n_tasks=1))

    def test_per_domain_cap_limits_query_universe(self, corpus_parts, corpus_reports):
        config = self.config(n_tasks=30, per_domain_cap=3)
        tasks = build_tasks(corpus_parts, corpus_reports, config)
        per_domain = collections.defaultdict(set)
        for task in tasks:
            per_domain[task.query.domain].add(task.query.id)
        assert all(len(ids) <= 3 for ids in per_domain.values())


class TestArchive:
    def test_round_trip(self, corpus, corpus_parts, corpus_reports, tmp_path):
        config = TaskSetConfig(n_tasks=6, seed=5)
        tasks = build_tasks(corpus_parts, corpus_reports, config)
        path = tmp_path / "tasks.jsonl"
        save_task_archive(tasks, config, path, provenance={"config_hash": "h"})

        items_by_id = {item.id: item for item in corpus.items}
        loaded, meta = load_task_archive(path, items_by_id, corpus_reports)
        assert meta["kind"] == "task-set"
        assert meta["seed"] == 5
        assert [t.query.id for t in loaded] == [t.query.id for t in tasks]
        for before, after in zip(tasks, loaded):
            assert [d.id for d, _ in after.demonstrations] == [d.id for d, _ in before.demonstrations]
            assert after.gold == before.gold

    def test_missing_item_rejected(self, corpus, corpus_parts, corpus_reports, tmp_path):
        config = TaskSetConfig(n_tasks=3, seed=5)
        tasks = build_tasks(corpus_parts, corpus_reports, config)
        path = tmp_path / "tasks.jsonl"
        save_task_archive(tasks, config, path)
        items_by_id = {item.id: item for item in corpus.items if item.id != tasks[0].query.id}
        with pytest.raises(TaskBuildError):
            load_task_archive(path, items_by_id, corpus_reports)

    def test_label_drift_rejected(self, corpus, corpus_parts, corpus_reports, tmp_path):
        config = TaskSetConfig(n_tasks=3, seed=5)
        tasks = build_tasks(corpus_parts, corpus_reports, config)
        path = tmp_path / "tasks.jsonl"
        save_task_archive(tasks, config, path)
        # flip the stored gold for the first task
        lines = path.read_text().splitlines()
        record = json.loads(lines[1])
        record["gold"] = 1 - record["gold"]
        lines[1] = json.dumps(record)
        path.write_text("\n".join(lines) + "\n")
        items_by_id = {item.id: item for item in corpus.items}
        with pytest.raises(TaskBuildError):
            load_task_archive(path, items_by_id, corpus_reports)


class TestSubstream:
    def test_named_streams_independent(self):
        a = substream(1, "alpha").random()
        b = substream(1, "beta").random()
        assert a != b

    def test_stable_across_instances(self):
        assert substream(9, "x").random() == substream(9, "x").random()
