"""Command-line pipeline: generate -> preprocess -> train -> predict/evaluate -> compare/plot.

Exit status: 0 on success, 1 on a domain error (bad data, missing artifact,
invalid config), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .data import (
    atomic_write,
    format_timestamp,
    load_csv,
    load_prepared,
    preprocess,
    save_csv,
    save_prepared,
    synth_generate,
)
from .errors import MissingArtifactError, RbfError
from .genetic import FitnessHistory, evolve
from .metrics import (
    TASKS,
    congestion_labels,
    constant_predictor,
    evaluate,
    predicted_flows,
    reports_from_json,
    reports_to_json,
    reports_to_markdown,
)
from .network import dumps_model, init_network, loads_model, network_hash
from .report import (
    ComparisonTable,
    PLOT_KINDS,
    compare_report,
    emit_plot_data,
    load_fixture,
    render_csv,
    render_markdown,
    table_notes,
)
from .traffic import Level
from .training import LossHistory, train

MODES = ("backprop", "ga", "hybrid")


def _sha(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _write_manifest(path, command, cfg: RunConfig, inputs=(), outputs=()):
    manifest = {
        "command": command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "versions": {"deeprbf": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "inputs": {Path(p).name: _sha(p) for p in inputs},
        "outputs": {Path(p).name: _sha(p) for p in outputs},
    }
    atomic_write(path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _need(path, what):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"{what} not found: {path}")
    return path


def _load_model(path):
    return loads_model(_need(path, "model file").read_text(encoding="utf-8"))


def cmd_generate(args, cfg: RunConfig):
    ds = synth_generate(cfg.synth, cfg.seed)
    save_csv(ds, args.out)
    _write_manifest(f"{args.out}.manifest.json", "generate", cfg, outputs=[args.out])
    print(f"wrote {len(ds)} observations to {args.out}")


def cmd_preprocess(args, cfg: RunConfig):
    ds = load_csv(_need(args.data, "dataset"), strict=cfg.data.strict_csv)
    prep = preprocess(
        ds,
        cfg.features,
        cfg.clean,
        ratio=(cfg.data.train_fraction, 1.0 - cfg.data.train_fraction),
        mode=cfg.data.split_mode,
        seed=cfg.seed,
        horizon=cfg.data.horizon,
    )
    out = Path(args.out_dir)
    save_prepared(prep, out)
    outputs = [out / n for n in ("train.csv", "test.csv", "norm_stats.json", "clean_report.json")]
    _write_manifest(out / "manifest.json", "preprocess", cfg, inputs=[args.data], outputs=outputs)
    print(f"train {len(prep.train)} / test {len(prep.test)} windows, {prep.feature_stats.dim} features -> {out}")


def cmd_train(args, cfg: RunConfig):
    prep = load_prepared(_need(args.prep, "preprocessed directory"))
    X, y = prep.train.X, prep.train.y
    spec = cfg.network.spec(X.shape[1], y.shape[1])
    rng = np.random.default_rng(cfg.seed)
    net = init_network(spec, rng, cfg.network.center_strategy, data=X)
    tcfg = cfg.training.build(cfg.seed)
    out = Path(args.out)
    written = [out]
    loss_hist, fit_hist = None, None
    if args.mode in ("ga", "hybrid"):
        net, fit_hist = evolve(spec, X, y, cfg.ga.build(cfg.seed), tcfg.loss_kind, geometry=net.geometry)
    if args.mode in ("backprop", "hybrid"):
        net, loss_hist = train(net, X, y, tcfg, prep.test.X, prep.test.y)
    model_text = dumps_model(
        net,
        norm_stats=prep.norm_stats_dict(),
        seed=cfg.seed,
        config_hash=cfg.hash(),
        training={"mode": args.mode},
    )
    atomic_write(out, model_text)
    if loss_hist is not None:
        loss_path = out.with_suffix(".loss.csv")
        atomic_write(loss_path, loss_hist.to_csv())
        written.append(loss_path)
    if fit_hist is not None:
        fit_path = out.with_suffix(".fitness.csv")
        atomic_write(fit_path, fit_hist.to_csv())
        written.append(fit_path)
    _write_manifest(f"{out}.manifest.json", f"train --mode {args.mode}", cfg,
                    inputs=[Path(args.prep) / "train.csv"], outputs=written)
    final = loss_hist.train_loss[-1] if loss_hist else fit_hist.best[-1]
    print(f"trained ({args.mode}) model {network_hash(net)}; final training loss {final:.6g} -> {out}")


def cmd_predict(args, cfg: RunConfig):
    net, _ = _load_model(args.model)
    prep = load_prepared(_need(args.prep, "preprocessed directory"))
    data = prep.test if args.split == "test" else prep.train
    flows = predicted_flows(net, data, prep.target_stats)
    pred_lv, true_lv = congestion_labels(flows, data, cfg.traffic.profile, cfg.traffic.thresholds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target_timestamp", "predicted_flow", "actual_flow", "predicted_level", "actual_level"])
    for i in range(len(data)):
        w.writerow([
            format_timestamp(data.aux["target_timestamp"][i]),
            repr(float(flows[i])),
            repr(float(data.aux["target_flow"][i])),
            Level(int(pred_lv[i])).name.lower(),
            Level(int(true_lv[i])).name.lower(),
        ])
    atomic_write(args.out, buf.getvalue())
    _write_manifest(f"{args.out}.manifest.json", "predict", cfg, inputs=[args.model], outputs=[args.out])
    print(f"wrote {len(data)} predictions to {args.out}")


def cmd_evaluate(args, cfg: RunConfig):
    net, doc = _load_model(args.model)
    prep = load_prepared(_need(args.prep, "preprocessed directory"))
    baseline = constant_predictor(net.input_dim, float(np.mean(prep.train.y)))
    tasks = TASKS if args.task == "all" else (args.task,)
    prov = {"model_file": _sha(args.model), "test_file": _sha(Path(args.prep) / "test.csv"),
            "mode": doc.get("training", {}).get("mode")}
    reports = []
    for label, model in (("model-" + network_hash(net), net), ("baseline-constant-mean", baseline)):
        for task in tasks:
            reports.append(evaluate(
                model, prep.test, task, prep.target_stats, cfg.traffic.profile, cfg.traffic.thresholds,
                model_id=label, seed=cfg.seed, config_hash=cfg.hash(), provenance=prov,
            ))
    out = Path(args.out)
    atomic_write(out, reports_to_json(reports))
    md = out.with_suffix(".md")
    atomic_write(md, reports_to_markdown(reports))
    _write_manifest(f"{out}.manifest.json", "evaluate", cfg, inputs=[args.model], outputs=[out, md])
    for r in reports:
        print(r.model_id, r.task, ", ".join(f"{n}={v:.4g}" for n, v in r.metric_items()))


def cmd_compare(args, cfg: RunConfig):
    out = Path(args.out_dir)
    fixture = load_fixture(args.fixture)
    fixture_csv = out / "fixture_table.csv"
    atomic_write(fixture_csv, render_csv(fixture))
    sections = ["## Published MAE by vehicle count", "", render_markdown(fixture, table_notes(fixture))]
    written = [fixture_csv]
    if args.reports:
        reports = []
        for path in args.reports:
            reports += reports_from_json(_need(path, "report file").read_text(encoding="utf-8"))
        table = compare_report(reports)
        computed_csv = out / "computed_table.csv"
        atomic_write(computed_csv, render_csv(table))
        written.append(computed_csv)
        shown = ComparisonTable(table.row_key, table.rows, table.columns, table.values, table.source, 4)
        sections += ["## This run (desk-scale synthetic data)", "", render_markdown(shown)]
    md = out / "comparison.md"
    atomic_write(md, "\n".join(sections))
    written.append(md)
    _write_manifest(out / "manifest.json", "compare", cfg, inputs=args.reports or [], outputs=written)
    print(f"comparison written to {out}")


def _read_history(path, kind):
    with open(_need(path, f"{kind} history"), encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if kind == "loss":
        val = [float(r["val_loss"]) for r in rows] if rows and "val_loss" in rows[0] else None
        return LossHistory([float(r["train_loss"]) for r in rows], val)
    return FitnessHistory([float(r["best_fitness"]) for r in rows], [float(r["mean_fitness"]) for r in rows])


def cmd_plot(args, cfg: RunConfig):
    if args.kind == "mae_vs_vehicles":
        data = load_fixture(args.input)
    else:
        if args.input is None:
            raise MissingArtifactError(f"plot --kind {args.kind} needs --input <history csv>")
        data = _read_history(args.input, args.kind)
    emit_plot_data(data, args.kind, args.out)
    _write_manifest(f"{args.out}.manifest.json", f"plot --kind {args.kind}", cfg,
                    inputs=[args.input] if args.input else [], outputs=[args.out])
    print(f"plot data written to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deeprbf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration (defaults when omitted)")
    common.add_argument("--seed", type=int, help="overrides RBF_SEED and the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic traffic dataset CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", parents=[common], help="clean, window, split and normalize a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="fit a model on preprocessed data")
    p.add_argument("--prep", required=True, help="directory written by preprocess")
    p.add_argument("--mode", choices=MODES, default="backprop")
    p.add_argument("--out", required=True, help="model JSON path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="write flow and congestion predictions")
    p.add_argument("--model", required=True)
    p.add_argument("--prep", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score a model and the constant-mean baseline")
    p.add_argument("--model", required=True)
    p.add_argument("--prep", required=True)
    p.add_argument("--task", choices=TASKS + ("all",), default="all")
    p.add_argument("--out", required=True, help="report JSON path (a .md twin is written too)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common], help="render the published table and computed reports")
    p.add_argument("--reports", nargs="*", default=[])
    p.add_argument("--fixture", help="table CSV (defaults to the shipped MAE table)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", parents=[common], help="emit plot-data CSV series")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--input", help="history CSV (loss/fitness) or table CSV (mae_vs_vehicles)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        args.func(args, cfg)
    except (RbfError, OSError) as exc:
        print(f"deeprbf {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
