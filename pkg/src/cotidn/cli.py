"""Command-line entry point: simulate, sweep, train-activation, build-exemplars, plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .cot.autocot import ExemplarStore, build_auto_cot_exemplars, harvest_feedback
from .errors import ConfigError, InvariantViolation, TransportError, UnrecognizedIntent
from .harness.config import ExperimentConfig
from .harness.plots import emit_plot_data, read_sweep_csv
from .harness.runner import build_scenario, make_backend, run_single
from .harness.sweep import run_sweep
from .harness.training import train_activation_cmd
from .intent import HttpEmbedder, load_corpus, parse_intent

EXIT_OK, EXIT_CONFIG, EXIT_TRANSPORT, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("cotidn")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    changes = {}
    if getattr(args, "backend", None):
        changes["backend"] = args.backend
    if getattr(args, "pipeline", None):
        changes["pipelines"] = [args.pipeline.replace("-", "_")]
    if args.command != "simulate" and getattr(args, "seed", None) is not None:
        changes["config_seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    pipeline = cfg.pipelines[0] if args.pipeline else "cot"
    seed = 42 if args.seed is None else args.seed
    range_m = 400.0 if args.range is None else args.range
    rec = run_single(cfg, seed, range_m, pipeline)
    if cfg.backend == "mock" and rec.fallback:
        raise InvariantViolation(f"mock backend fell back to the baseline: {rec.error}")
    doc = rec.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "run.json").write_text(text + "\n", encoding="utf-8")
    if cfg.exemplar_path and cfg.feedback_threshold is not None and rec.trace is not None and pipeline == "cot":
        store = ExemplarStore.load(cfg.exemplar_path)
        tag = "joint" if rec.module_id is None else ("generic", "deployment", "power_control", "joint")[rec.module_id]
        if harvest_feedback(store, cfg.intent, rec.trace, rec.utility.q_total, tag, cfg.feedback_threshold):
            store.save(cfg.exemplar_path)
            log.info("added run to exemplar store %s", cfg.exemplar_path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    result = run_sweep(cfg)
    out = Path(args.out)
    paths = emit_plot_data(result, out, ("csv", "svg") if args.svg else ("csv",))
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    for row in result.rows:
        print(
            f"{row.range_m:6g} m  {row.pipeline:8s} coverage {row.mean_coverage:.3f}  "
            f"sum rate {row.mean_sum_rate_bps / 1e6:8.3f} Mbps  Q_total {row.mean_q_total:.4f}  n={row.n}"
        )
    print("wrote " + ", ".join(str(p) for p in paths))
    for line in result.failures:
        print(f"failed cell: {line}", file=sys.stderr)
    if cfg.backend == "mock" and (result.fallback_count or result.failures):
        raise InvariantViolation(
            f"mock sweep had {result.fallback_count} fallbacks and {len(result.failures)} failed cells"
        )
    bad_n = [r for r in result.rows if r.n != len(cfg.seeds)]
    if bad_n and cfg.backend == "mock":
        raise InvariantViolation(f"{len(bad_n)} rows have n != {len(cfg.seeds)}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    report = train_activation_cmd(cfg, args.out, corpus=not args.case_study_only)
    names = ("generic", "deployment", "power_control", "joint")
    for cluster, action in sorted(report.greedy.items()):
        print(f"cluster {cluster}: module {action} ({names[action]})")
    for arm in (report.comparison.trained, report.comparison.random):
        print(
            f"{arm.label:8s} mean Q_total {arm.mean_q_total:.4f}  coverage {arm.mean_coverage:.3f}  "
            f"sum rate {arm.mean_sum_rate_bps / 1e6:.3f} Mbps  modules {list(arm.module_counts)}"
        )
    print(f"wrote {report.policy_path}, {report.comparison_path}")
    return EXIT_OK


def cmd_build_exemplars(args) -> int:
    cfg = _config(args)
    questions = []
    for item in load_corpus():
        try:
            parse_intent(item.text)
        except UnrecognizedIntent:
            continue
        questions.append(item)
    embedder = HttpEmbedder(model=cfg.http.embed_model) if cfg.embedder == "http" else None
    scenario = build_scenario(cfg, cfg.seeds[0], sorted(cfg.range_sweep)[len(cfg.range_sweep) // 2])
    exemplars = build_auto_cot_exemplars(
        questions, args.k, make_backend(cfg, "cot"), embedder, scenario=scenario, seed=cfg.config_seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = ExemplarStore(exemplars)
    store.save(out / "exemplars.json")
    for ex in exemplars:
        print(f"[{ex.tag}] {ex.question} ({len(ex.reasoning_chain)} steps)")
    print(f"wrote {out / 'exemplars.json'}")
    return EXIT_OK


def cmd_plot(args) -> int:
    src = Path(args.input) if args.input else Path(args.out) / "sweep.csv"
    if not src.exists():
        raise ConfigError(f"no sweep CSV at {src}")
    paths = emit_plot_data(read_sweep_csv(src), Path(args.out), ("csv", "svg"))
    print("wrote " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--seed", type=int, help="user-placement seed (simulate) or config seed")
    common.add_argument("--backend", choices=("mock", "http"))
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cotidn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run one episode")
    p.add_argument("--range", type=float, help="communication range in meters (default 400)")
    p.add_argument("--pipeline", choices=("cot", "non-cot"))
    p.set_defaults(func=cmd_simulate, out=None)

    p = sub.add_parser("sweep", parents=[common], help="range sweep over seeds and pipelines")
    p.add_argument("--pipeline", choices=("cot", "non-cot"))
    p.add_argument("--no-svg", dest="svg", action="store_false")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("train-activation", parents=[common], help="train the module-activation policy")
    p.add_argument("--case-study-only", action="store_true", help="train on the configured intent only")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("build-exemplars", parents=[common], help="Auto-CoT exemplars from the intent corpus")
    p.add_argument("--k", type=int, default=4)
    p.set_defaults(func=cmd_build_exemplars)

    p = sub.add_parser("plot", parents=[common], help="render sweep.svg from a sweep CSV")
    p.add_argument("--input", help="sweep CSV (default <out>/sweep.csv)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
