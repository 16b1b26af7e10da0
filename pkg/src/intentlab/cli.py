"""Command-line front end: dataset ops, training, evaluation, view export,
and serving.

Every tunable flag is generated from the config schema, so the CLI, the
config file format, and the service forms can never drift apart. A config
file passed with --config overrides flag values. Exit codes: 0 success,
1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .analysis import MetricsReport
from .corpus import load_dataset
from .pipeline import (CONFIG_SCHEMA, evaluate_pipeline, train_pipeline,
                       validate_config)
from .service.store import (ENV_ADDR, ENV_CONSOLE_DIR, ENV_DATA_ROOT,
                            ReferencedError, RunStore)
from .service.views import VIEW_TAGS, ViewUnsupported, get_view
from .utils import atomic_write_text, canonical_json

_BOOL_TOKENS = {"true": True, "1": True, "yes": True,
                "false": False, "0": False, "no": False}


def _parse_bool(token: str) -> bool:
    try:
        return _BOOL_TOKENS[token.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"expected true/false, got {token!r}") from None


class _Parser(argparse.ArgumentParser):
    # usage mistakes are user errors (exit 1), not internal errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(parser: argparse.ArgumentParser, skip=()) -> None:
    for spec in CONFIG_SCHEMA:
        name = spec["name"]
        if name in skip:
            continue
        kwargs = {"help": spec["help"], "default": None, "dest": name}
        if spec["type"] == "bool":
            kwargs["type"] = _parse_bool
            kwargs["metavar"] = "true|false"
        elif spec["type"] == "choice":
            kwargs["choices"] = list(spec["choices"])
        elif spec["type"] == "int":
            kwargs["type"] = int
        elif spec["type"] == "float":
            kwargs["type"] = float
        parser.add_argument(f"--{name}", **kwargs)


def _data_root(args) -> Path:
    if getattr(args, "data_root", None):
        return Path(args.data_root)
    return Path(os.environ.get(ENV_DATA_ROOT, "./intentlab-data"))


def _collect_config(args) -> dict:
    values = {}
    for spec in CONFIG_SCHEMA:
        given = getattr(args, spec["name"], None)
        if given is not None:
            values[spec["name"]] = given
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            from_file = json.load(fh)
        if not isinstance(from_file, dict):
            raise ValueError(f"{args.config}: config file must hold a JSON object")
        values.update(from_file)  # the file wins over flags
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="intentlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_dataset = sub.add_parser("dataset", help="dataset registry operations")
    dsub = p_dataset.add_subparsers(dest="dataset_command", required=True)
    p_reg = dsub.add_parser("register", help="validate and register a dataset")
    p_reg.add_argument("--data-root", help="service data directory")
    p_reg.add_argument("--name", required=True)
    p_reg.add_argument("--path", required=True)
    p_reg.add_argument("--format", default="tsv", choices=("tsv", "jsonl"))
    p_reg.set_defaults(func=cmd_dataset_register)
    p_stats = dsub.add_parser("stats", help="per-split and per-label statistics")
    p_stats.add_argument("--data-root", help="service data directory")
    p_stats.add_argument("--name", help="registered dataset name")
    p_stats.add_argument("--path", help="dataset directory (bypasses the registry)")
    p_stats.add_argument("--format", default="tsv", choices=("tsv", "jsonl"))
    p_stats.set_defaults(func=cmd_dataset_stats)

    p_train = sub.add_parser("train", help="train detection or discovery alone")
    p_train.add_argument("--data-root", help="service data directory")
    p_train.add_argument("--config", help="JSON config file; overrides flags")
    p_train.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_pipe = sub.add_parser("pipeline", help="full detect-discover pipeline")
    psub = p_pipe.add_subparsers(dest="pipeline_command", required=True)
    p_run = psub.add_parser("run", help="train, evaluate, and write a report")
    p_run.add_argument("--data-root", help="service data directory")
    p_run.add_argument("--config", help="JSON config file; overrides flags")
    p_run.add_argument("--out", required=True, help="report file path")
    p_run.add_argument("--save-pipeline", help="also save the trained pipeline here")
    _add_config_flags(p_run, skip=("task",))
    p_run.set_defaults(func=cmd_pipeline_run)

    p_eval = sub.add_parser("eval", help="read metrics from a finished run")
    p_eval.add_argument("--data-root", help="service data directory")
    p_eval.add_argument("--run", required=True, help="run id")
    p_eval.add_argument("--metric", default="all",
                        choices=("known_acc", "nmi", "all"))
    p_eval.set_defaults(func=cmd_eval)

    p_views = sub.add_parser("export-views", help="write analysis view payloads")
    p_views.add_argument("--data-root", help="service data directory")
    p_views.add_argument("--run", required=True, help="run id")
    p_views.add_argument("--out", required=True, help="output directory")
    p_views.set_defaults(func=cmd_export_views)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--data-root", help="service data directory")
    p_serve.add_argument("--addr", help="host:port (default 127.0.0.1:8234)")
    p_serve.add_argument("--workers", type=int, help="worker thread count")
    p_serve.add_argument("--console-dir",
                         help="serve built console assets from this directory")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def cmd_dataset_register(args) -> int:
    store = RunStore(_data_root(args))
    entry = store.register_dataset(args.name, args.path, args.format)
    print(canonical_json(entry))
    return 0


def cmd_dataset_stats(args) -> int:
    if args.path:
        if not Path(args.path).exists():
            raise FileNotFoundError(f"dataset path does not exist: {args.path}")
        dataset = load_dataset(args.path, args.format)
        from .corpus import dataset_stats as _stats
        print(canonical_json(_stats(dataset)))
        return 0
    if not args.name:
        raise ValueError("dataset stats needs --name or --path")
    store = RunStore(_data_root(args))
    print(canonical_json(store.dataset_statistics(args.name)))
    return 0


def _resolve_dataset(args, config):
    store = RunStore(_data_root(args))
    return store.load_dataset(config.dataset)


def cmd_train(args) -> int:
    values = _collect_config(args)
    values.setdefault("task", "detect")
    if values.get("task") == "pipeline":
        raise ValueError("train handles a single component; use 'pipeline run' "
                         "for the full procedure")
    config = validate_config(values)
    dataset = _resolve_dataset(args, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trained, record = train_pipeline(config, dataset)
    trained.save(out / "pipeline.json")
    report = evaluate_pipeline(trained, dataset, "test")
    atomic_write_text(out / "report.json", report.to_json())
    print(f"run {record.run_id} finished: known_acc={report.known_acc:.4f} "
          f"open_nmi={report.open_nmi:.4f}")
    print(f"artifacts in {out}")
    return 0


def cmd_pipeline_run(args) -> int:
    values = _collect_config(args)
    values["task"] = "pipeline"
    config = validate_config(values)
    dataset = _resolve_dataset(args, config)
    trained, record = train_pipeline(config, dataset)
    report = evaluate_pipeline(trained, dataset, "test")
    atomic_write_text(args.out, report.to_json())
    if args.save_pipeline:
        trained.save(args.save_pipeline)
    print(f"run {record.run_id} finished: known_acc={report.known_acc:.4f} "
          f"open_nmi={report.open_nmi:.4f}")
    print(f"report written to {args.out}")
    return 0


def _load_report(args) -> MetricsReport:
    store = RunStore(_data_root(args))
    record = store.load_run(args.run)
    path = record.artifacts.get("report")
    if path is None:
        raise ValueError(f"run {args.run} is {record.state} and has no report")
    with open(path, encoding="utf-8") as fh:
        return MetricsReport.from_jsonable(json.load(fh))


def cmd_eval(args) -> int:
    report = _load_report(args)
    if args.metric == "known_acc":
        print(report.known_acc)
    elif args.metric == "nmi":
        print(report.open_nmi)
    else:
        print(canonical_json({"known_acc": report.known_acc,
                              "open_nmi": report.open_nmi}))
    return 0


def cmd_export_views(args) -> int:
    store = RunStore(_data_root(args))
    store.load_run(args.run)  # 404-equivalent check up front
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for tag in VIEW_TAGS:
        try:
            payload = get_view(store, args.run, tag)
        except ViewUnsupported as exc:
            print(f"skipping {tag}: {exc}", file=sys.stderr)
            continue
        atomic_write_text(out / f"{tag}.json", canonical_json(payload))
        written.append(tag)
    print(f"wrote {len(written)} view(s) to {out}: {', '.join(written)}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.api import create_app
    from .service.worker import WorkerPool

    store = RunStore(_data_root(args))
    addr = args.addr or os.environ.get(ENV_ADDR, "127.0.0.1:8234")
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad listen address (want host:port): {addr}")
    pool = WorkerPool(store, args.workers) if args.workers else None
    console_dir = args.console_dir or os.environ.get(ENV_CONSOLE_DIR) or None
    app = create_app(store, pool, console_dir=console_dir)
    uvicorn.run(app, host=host, port=int(port))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, KeyError, NotImplementedError, ReferencedError,
            OSError, json.JSONDecodeError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - anything else is our bug
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
