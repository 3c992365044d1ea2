"""Pipeline command line: analyze, tasks, optimize, eval, sweep.

Stages communicate through files so long runs can stop and resume: analyze
writes a report archive, tasks writes a task archive, optimize writes a run
directory (checkpoint, ledger, proposal log, rules), eval writes metrics.
Every artifact embeds the config hash, the seed, and the prompt hashes.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 provider error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .analysis import Analyzer, load_report_archive, save_report_archive
from .config import RunConfig
from .corpus import load_dataset, split_by_domain
from .errors import NewsJuryError, ProviderError
from .evaluation import evaluate_target, leave_one_domain_out, sweep_task_counts
from .judge import DecisionRule, RuleOrigin
from .optimizer import load_checkpoint, optimize
from .providers import RoleTag
from .tasks import load_task_archive, save_task_archive, build_tasks

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this pipeline reserves 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dump_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n")


class _JsonlSink:
    def __init__(self, path: str, mode: str = "w"):
        self.path = path
        self._fh = open(path, mode, encoding="utf-8")

    def __call__(self, record: dict) -> None:
        self._fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    def close(self) -> None:
        self._fh.close()


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides: dict = {
        "seed": args.seed,
        "workers": args.workers,
        "provider.cache_dir": args.cache_dir,
        "prompt_dir": getattr(args, "prompt_dir", None),
        "provider.record_to": getattr(args, "record", None),
        "tasks.n_tasks": getattr(args, "n_tasks", None),
        "optimizer.k": getattr(args, "k", None),
        "optimizer.n_iter_max": getattr(args, "n_iter", None),
        "optimizer.n_att_max": getattr(args, "n_att", None),
        "skip_optimization": getattr(args, "skip_optimization", None),
    }
    provider_arg = getattr(args, "provider", None)
    if provider_arg:
        if provider_arg == "live":
            overrides["provider.kind"] = "live"
        elif provider_arg.startswith("mock:"):
            overrides["provider.kind"] = "mock"
            overrides["provider.script"] = provider_arg[len("mock:"):]
        else:
            raise ValueError(f"--provider must be 'live' or 'mock:<path>', got {provider_arg!r}")
    return config.replace(**{k: v for k, v in overrides.items() if v is not None})


# ---------------------------------------------------------------- analyze


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    registry = config.registry()  # fail on missing prompt files before touching outputs
    provenance = config.provenance()
    dataset = load_dataset(args.dataset)

    existing = {}
    if args.resume and os.path.exists(args.out):
        existing, meta = load_report_archive(args.out)
        stored_hash = meta.get("provenance", {}).get("config_hash")
        if stored_hash != provenance["config_hash"]:
            raise NewsJuryError(
                f"{args.out} was produced under a different config "
                f"({stored_hash} vs {provenance['config_hash']}); not resuming"
            )

    analyzer = Analyzer(
        provider=config.build_provider(),
        registry=registry,
        retriever=config.evidence.retriever(),
        config=config.analysis,
        evidence_config=config.evidence.config(),
    )
    todo = [item for item in dataset.items if item.id not in existing]
    if config.workers > 1 and todo:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            fresh = list(pool.map(analyzer.analyze_full, todo))
    else:
        fresh = [analyzer.analyze_full(item) for item in todo]

    reports = dict(existing)
    for item, report in zip(todo, fresh):
        reports[item.id] = report
    save_report_archive(reports, [item.id for item in dataset.items], args.out, provenance)
    print(f"analyzed {len(fresh)} items ({len(existing)} reused) -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- tasks


def cmd_tasks(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    provenance = config.provenance()
    dataset = load_dataset(args.dataset)
    reports, _ = load_report_archive(args.reports)
    task_config = config.tasks.config(config.seed)
    tasks = build_tasks(split_by_domain(dataset), reports, task_config)
    save_task_archive(tasks, task_config, args.out, provenance)
    print(f"built {len(tasks)} validation tasks over {len(dataset.domains)} domains -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- optimize


def _rule_to_record(rule: DecisionRule, accuracy: float) -> dict:
    return {"id": rule.id, "text": rule.text, "origin": rule.origin.value, "accuracy": accuracy}


def _load_rules(path: str) -> list[DecisionRule]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [
        DecisionRule(id=rec["id"], text=rec["text"], origin=RuleOrigin(rec["origin"]))
        for rec in payload["rules"]
    ]


def _print_ledger_table(pairs) -> None:
    width = 72
    print(f"{'rule':<{width}} | accuracy")
    print("-" * width + "-+---------")
    for entry in pairs:
        text = entry.rule.text.replace("\n", " ")
        if len(text) > width:
            text = text[: width - 3] + "..."
        print(f"{text:<{width}} | {entry.accuracy:8.2%}")


def cmd_optimize(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    registry = config.registry()
    provenance = config.provenance()
    dataset = load_dataset(args.dataset)
    reports, _ = load_report_archive(args.reports)
    items_by_id = {item.id: item for item in dataset.items}
    tasks, _ = load_task_archive(args.tasks, items_by_id, reports)

    os.makedirs(args.out, exist_ok=True)
    checkpoint_path = os.path.join(args.out, "checkpoint.json")
    resume_state = None
    if args.resume and os.path.exists(checkpoint_path):
        resume_state = load_checkpoint(checkpoint_path)
        log.info("resuming from %s at iteration %d", checkpoint_path, resume_state.n_iter)

    # a resumed run extends the log it left behind rather than truncating it
    judgement_sink = _JsonlSink(
        os.path.join(args.out, "judgements.jsonl"),
        mode="a" if resume_state is not None else "w",
    )
    try:
        result = optimize(
            config.initial_rule_text(),
            tasks,
            config.optimizer,
            config.build_provider(),
            registry=registry,
            judge_config=config.judge.config(),
            seed=config.seed,
            workers=config.workers,
            checkpoint_path=checkpoint_path,
            resume_state=resume_state,
            judgement_sink=judgement_sink,
        )
    finally:
        judgement_sink.close()

    with open(os.path.join(args.out, "proposals.jsonl"), "w", encoding="utf-8") as fh:
        for record in result.state.trace:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    _dump_json(
        {
            "meta": provenance,
            "ledger": [_rule_to_record(e.rule, e.accuracy) for e in result.ledger],
        },
        os.path.join(args.out, "ledger.json"),
    )
    _dump_json(
        {
            "meta": provenance,
            "k": config.optimizer.k,
            "rules": [_rule_to_record(e.rule, e.accuracy) for e in result.pairs],
        },
        os.path.join(args.out, "rules.json"),
    )
    _print_ledger_table(result.ledger.entries)
    print(f"kept top {len(result.pairs)} rules -> {os.path.join(args.out, 'rules.json')}")
    return EXIT_OK


# ---------------------------------------------------------------- eval


def cmd_eval(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    registry = config.registry()
    provenance = config.provenance()
    dataset = load_dataset(args.dataset)
    reports, _ = load_report_archive(args.reports)
    parts = split_by_domain(dataset)
    provider = config.build_provider()
    judge_config = config.judge.config()
    judge_prompt = registry.template_for(RoleTag.JUDGE)

    if args.leave_one_out:
        payload: dict = {"meta": provenance, "folds": {}, "items": {}}
        current: list = []

        def on_fold(fold) -> None:
            payload["folds"][fold.domain] = fold.metrics.as_dict()
            payload["items"][fold.domain] = list(current)
            current.clear()
            # Rewrite after every fold so partial progress survives aborts.
            _dump_json(payload, args.out)

        result = leave_one_domain_out(
            parts=parts,
            reports=reports,
            initial_rule_text=config.initial_rule_text(),
            task_config=config.tasks.config(config.seed),
            optimizer_config=config.optimizer,
            provider=provider,
            registry=registry,
            judge_config=judge_config,
            workers=config.workers,
            eval_sink=current.append,
            on_fold=on_fold,
            skip_optimization=config.skip_optimization,
        )
        payload["averages"] = result.averages
        _dump_json(payload, args.out)
        for domain in sorted(result.per_domain):
            metrics = result.per_domain[domain]
            print(f"{domain:<16} accuracy {metrics.accuracy:.4f}  f1_fake {metrics.f1_fake:.4f}  f1_macro {metrics.f1_macro:.4f}")
        averages = result.averages
        print(f"{'average':<16} accuracy {averages['accuracy']:.4f}  f1_fake {averages['f1_fake']:.4f}  f1_macro {averages['f1_macro']:.4f}")
        return EXIT_OK

    if not args.target_domain:
        raise ValueError("eval needs --target-domain <domain> or --leave-one-out")
    if args.target_domain not in parts:
        raise NewsJuryError(f"dataset has no domain {args.target_domain!r} (has: {', '.join(sorted(parts))})")
    if not args.rules:
        raise ValueError("eval needs --rules <rules.json> when a target domain is given")
    rules = _load_rules(args.rules)
    target = parts[args.target_domain]
    demo_pool = [item for domain, part in sorted(parts.items()) if domain != args.target_domain for item in part.items]
    items_log: list = []
    metrics = evaluate_target(
        target,
        reports,
        demo_pool,
        rules,
        provider,
        judge_prompt,
        judge_config,
        demos_per_task=config.tasks.demos_per_task,
        seed=config.seed,
        sink=items_log.append,
    )
    _dump_json(
        {"meta": provenance, "target_domain": args.target_domain, "metrics": metrics.as_dict(), "items": items_log},
        args.out,
    )
    print(
        f"{args.target_domain}: accuracy {metrics.accuracy:.4f}  f1_fake {metrics.f1_fake:.4f}  "
        f"f1_macro {metrics.f1_macro:.4f}  (n={metrics.n})"
    )
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    registry = config.registry()
    provenance = config.provenance()
    dataset = load_dataset(args.dataset)
    reports, _ = load_report_archive(args.reports)
    candidates = [int(c) for c in args.candidates.split(",") if c.strip()]
    result = sweep_task_counts(
        split_by_domain(dataset),
        reports,
        candidates,
        config.initial_rule_text(),
        config.tasks.config(config.seed),
        config.optimizer,
        config.build_provider(),
        registry=registry,
        judge_config=config.judge.config(),
        n_folds=args.folds,
        workers=config.workers,
    )
    _dump_json(
        {"meta": provenance, "scores": {str(k): v for k, v in result["scores"].items()},
         "best_n_tasks": result["best_n_tasks"]},
        args.out,
    )
    for candidate in candidates:
        print(f"n_tasks={candidate}: mean held-fold accuracy {result['scores'][candidate]:.4f}")
    print(f"best n_tasks: {result['best_n_tasks']}")
    return EXIT_OK


# ---------------------------------------------------------------- wiring


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run config JSON file")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument("--workers", type=int, default=None, help="parallel provider calls")
    parser.add_argument("--cache-dir", default=None, help="persistent response cache directory")
    parser.add_argument("--provider", default=None, help="'live' or 'mock:<script-or-transcript>'")
    parser.add_argument("--record", default=None, help="record every provider exchange to this transcript")
    parser.add_argument("--prompt-dir", default=None, help="directory of prompt files to use instead of the packaged ones")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newsjury", description="Cross-domain misinformation detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[], help="produce analysis reports for every item")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="report archive to write (JSONL)")
    p.add_argument("--resume", action="store_true", help="skip items already in the archive")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tasks", help="build cross-domain validation tasks")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--reports", required=True, help="report archive from analyze")
    p.add_argument("--out", required=True, help="task archive to write (JSONL)")
    p.add_argument("--n-tasks", type=int, default=None)
    p.set_defaults(func=cmd_tasks)

    p = sub.add_parser("optimize", help="search for decision rules on the validation tasks")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--tasks", required=True, help="task archive from the tasks stage")
    p.add_argument("--out", required=True, help="run directory for checkpoint/ledger/rules")
    p.add_argument("--resume", action="store_true", help="resume from the run directory checkpoint")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n-iter", type=int, default=None)
    p.add_argument("--n-att", type=int, default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", help="evaluate rules on a held-out domain")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--rules", default=None, help="rules.json from optimize (single-target mode)")
    p.add_argument("--target-domain", default=None)
    p.add_argument("--leave-one-out", action="store_true",
                   help="run the full per-domain protocol (tasks + optimize + eval per fold)")
    p.add_argument("--skip-optimization", dest="skip_optimization", action="store_const", const=True,
                   default=None, help="judge every fold with the initial rule alone (no rule search)")
    p.add_argument("--out", required=True, help="metrics JSON to write")
    p.add_argument("--n-tasks", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n-iter", type=int, default=None)
    p.add_argument("--n-att", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-search the validation task count by fold cross-validation")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--candidates", required=True, help="comma-separated task counts, e.g. 4,8,16")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n-iter", type=int, default=None)
    p.add_argument("--n-att", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except NewsJuryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
