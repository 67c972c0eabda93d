"""Command-line entry point.

Subcommands: gen (datasets), train (any strategy), eval (validity accuracy
plus solution-count bins), toy (the two closed-form reproductions), analyze
(selector diagnostics), compare (paired significance test between two eval
runs), sweep (the hyperparameter grid, sequentially).

Configs are flat ``key = value`` text files; trailing ``key=value`` arguments
override file values, last one wins.  Every command writes a manifest (config
echo, seed, versions) into its output directory, sufficient to re-run it, and
reruns with the same config and seed are byte-identical.  Exit codes: 0 ok,
1 input/config error, 2 runtime/numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, data, evaluation, network, reports, training
from .data import GenConfig
from .errors import InputError, MultisolError, NumericError, ParseError
from .evaluation import DEFAULT_BIN_EDGES
from .network import NET_TAG
from .selection import (load_selector_checkpoint, save_selector_checkpoint)
from .training import SELECTR, TrainConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    p = _Parser(prog="multisol",
                description="training laboratory for one-of-many puzzle solutions")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required,
                        help="flat key=value config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")

    common(sub.add_parser("gen", help="generate train/dev/test datasets"))
    common(sub.add_parser("train", help="train one strategy"))

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out", default=None)
    ev.add_argument("--bins", default=None,
                    help="solution-count bins, e.g. 1,2,3,4-10,11-50")

    toy = sub.add_parser("toy", help="closed-form toy reproductions")
    toy.add_argument("which", choices=("xor", "logistic"))
    toy.add_argument("--out", default=None)

    an = sub.add_parser("analyze", help="selector diagnostics on a dataset")
    an.add_argument("--checkpoint", required=True)
    an.add_argument("--selector", required=True)
    an.add_argument("--data", required=True)
    an.add_argument("--out", default=None)
    an.add_argument("--bins", default=None)

    cp = sub.add_parser("compare", help="McNemar test between two eval runs")
    cp.add_argument("--run-a", required=True)
    cp.add_argument("--run-b", required=True)
    cp.add_argument("--out", default=None)

    common(sub.add_parser("sweep", help="run the hyperparameter grid sequentially"))
    return p


# ---- config plumbing ----

def parse_kv_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected key = value")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def apply_overrides(cfg: dict[str, str], overrides) -> dict[str, str]:
    out = dict(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise InputError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _parse_field(name: str, text: str, default):
    if name == "lr_phi":
        return None if text.lower() in ("none", "") else float(text)
    if name == "hidden":
        return tuple(int(tok) for tok in text.replace(",", " ").split())
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def coerce_dataclass(cls, raw: dict[str, str], extra_keys=()):
    """Build a config dataclass from string values; unknown keys are errors."""
    known = {f.name: f for f in dataclasses.fields(cls)}
    values, leftover = {}, {}
    for key, text in raw.items():
        if key in known:
            f = known[key]
            default = f.default if f.default is not dataclasses.MISSING else (
                "" if key == "kind" else None)
            try:
                values[key] = _parse_field(key, text, default)
            except ValueError as exc:
                raise InputError(f"bad value for {key!r}: {text!r}") from exc
        elif key in extra_keys:
            leftover[key] = text
        else:
            raise InputError(f"unknown config key {key!r}")
    try:
        return cls(**values), leftover
    except TypeError as exc:
        raise InputError(f"incomplete config: {exc}") from exc


def parse_bins(spec: str | None):
    if spec is None:
        return DEFAULT_BIN_EDGES
    edges = []
    for token in spec.split(","):
        token = token.strip()
        try:
            if "-" in token:
                lo, hi = token.split("-", 1)
                edges.append((int(lo), int(hi)))
            else:
                edges.append((int(token), int(token)))
        except ValueError as exc:
            raise InputError(f"bad bin token {token!r}") from exc
    return tuple(edges)


def _outdir(args, default: str) -> Path:
    out = Path(args.out if args.out else default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(outdir: Path, command: str, config: dict, seed) -> None:
    reports.write_json(outdir / "manifest.json", {
        "command": command,
        "config": config,
        "seed": seed,
        "versions": {"multisol": __version__,
                     "numpy": np.__version__,
                     "python": "%d.%d.%d" % sys.version_info[:3]},
    })


# ---- subcommands ----

def cmd_gen(args) -> int:
    raw = apply_overrides(parse_kv_file(args.config), args.overrides)
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if "kind" not in raw:
        raise InputError("gen config must set 'kind'")
    cfg, _ = coerce_dataclass(GenConfig, raw)
    cfg.validate()
    corpus = data.gen_corpus(cfg)
    outdir = _outdir(args, "out/gen")
    stats_rows = []
    for split in data.SPLITS:
        path = outdir / f"{split}.jsonl"
        data.save(corpus[split], path)
        st = data.dataset_stats(corpus[split])
        stats_rows.append({"split": split, "file": path.name,
                           "queries": st.num_queries,
                           "ms_percent": st.ms_percent,
                           "avg_targets_per_ms": st.avg_targets_per_ms})
    reports.write_jsonl(outdir / "stats.jsonl", stats_rows)
    write_manifest(outdir, "gen", cfg.echo(), cfg.seed)
    for row in stats_rows:
        print(f"{row['split']}: {row['queries']} queries, "
              f"{row['ms_percent']:.1f}% multi-solution, "
              f"avg {row['avg_targets_per_ms']:.2f} stored targets per MS query")
    return 0


_DATA_KEYS = ("train_data", "dev_data", "test_data")


def _load_train_inputs(raw):
    cfg, leftover = coerce_dataclass(TrainConfig, raw, extra_keys=_DATA_KEYS)
    cfg.validate()
    for key in ("train_data", "dev_data"):
        if key not in leftover:
            raise InputError(f"train config must set {key!r}")
    train_ds = data.load(leftover["train_data"])
    dev_ds = data.load(leftover["dev_data"])
    test_ds = data.load(leftover["test_data"]) if "test_data" in leftover else None
    return cfg, train_ds, dev_ds, test_ds, leftover


def _run_training(cfg, train_ds, dev_ds, test_ds, outdir: Path,
                  data_paths: dict) -> dict:
    result = training.train(cfg, train_ds, dev_ds)
    state = result.state
    reports.write_jsonl(outdir / "metrics.jsonl", result.metrics)
    network.save_checkpoint(outdir / "theta.ckpt", NET_TAG,
                            result.net.config_echo(), step=state.best_t,
                            seed=cfg.seed, params=state.best_theta)
    training.save_train_state(state, outdir / "train_state.npz")
    if result.selector is not None:
        save_selector_checkpoint(outdir / "selector.ckpt", result.selector,
                                 state.sel_state, step=state.t)
    reports.fig_training_curves(result.metrics, outdir / "training_curves.png")
    summary = {"strategy": cfg.strategy, "updates": state.t,
               "best_dev_accuracy": state.best_metric,
               "best_update": state.best_t,
               "pretrain_used": result.pretrain_used}
    if test_ds is not None:
        rep = evaluation.accuracy(result.net, state.best_theta, test_ds)
        summary["test"] = {"overall": rep.overall, "os": rep.os_accuracy,
                           "ms": rep.ms_accuracy}
    reports.write_json(outdir / "result.json", summary)
    manifest_cfg = cfg.echo()
    manifest_cfg.update(data_paths)
    write_manifest(outdir, "train", manifest_cfg, cfg.seed)
    return summary


def cmd_train(args) -> int:
    raw = apply_overrides(parse_kv_file(args.config), args.overrides)
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    cfg, train_ds, dev_ds, test_ds, leftover = _load_train_inputs(raw)
    outdir = _outdir(args, "out/train")
    summary = _run_training(cfg, train_ds, dev_ds, test_ds, outdir,
                            {k: leftover[k] for k in leftover})
    print(f"{cfg.strategy}: best dev accuracy "
          f"{summary['best_dev_accuracy']:.3f} at update {summary['best_update']}")
    if "test" in summary:
        t = summary["test"]
        os_s = "--" if t["os"] is None else f"{t['os']:.3f}"
        ms_s = "--" if t["ms"] is None else f"{t['ms']:.3f}"
        print(f"test: overall {t['overall']:.3f}  OS {os_s}  MS {ms_s}")
    return 0


def _eval_report(net, theta, dataset, edges):
    rep = evaluation.accuracy(net, theta, dataset)
    return evaluation.bin_by_solution_count(rep, dataset, edges)


def _record_rows(dataset, rep):
    rows = []
    for i, rec in enumerate(dataset.records):
        rows.append({
            "index": i,
            "query": hashlib.sha256(rec.key()).hexdigest()[:16],
            "correct": bool(rep.correct[i]),
            "n_solutions": rec.total_solutions,
            "is_ms": rec.is_ms,
            "givens": rec.num_givens,
        })
    return rows


def cmd_eval(args) -> int:
    edges = parse_bins(args.bins)
    header, theta = network.load_checkpoint(args.checkpoint, NET_TAG)
    net = network.network_from_checkpoint_header(header)
    dataset = data.load(args.data)
    rep = _eval_report(net, theta, dataset, edges)
    outdir = _outdir(args, "out/eval")
    reports.write_jsonl(outdir / "report.jsonl", _record_rows(dataset, rep))
    reports.write_jsonl(outdir / "bins.jsonl", reports.bin_rows(rep))
    summary = reports.accuracy_summary(rep)
    (outdir / "summary.txt").write_text(summary, encoding="utf-8")
    reports.fig_accuracy_vs_solutions(rep, outdir / "accuracy_vs_solutions.png")
    reports.fig_givens_vs_solutions(rep, outdir / "givens_vs_solutions.png")
    write_manifest(outdir, "eval",
                   {"checkpoint": str(args.checkpoint), "data": str(args.data),
                    "bins": [list(e) for e in edges]},
                   header.get("seed"))
    print(summary, end="")
    return 0


def cmd_toy(args) -> int:
    raw = apply_overrides({}, args.overrides)
    kwargs = {}
    if "lr" in raw:
        kwargs["lr"] = float(raw.pop("lr"))
    if "max_steps" in raw:
        kwargs["max_steps"] = int(raw.pop("max_steps"))
    if args.which == "xor" and "seed" in raw:
        kwargs["seed"] = int(raw.pop("seed"))
    if raw:
        raise InputError(f"unknown toy overrides: {sorted(raw)}")
    outdir = _outdir(args, f"out/toy_{args.which}")
    if args.which == "xor":
        report = training.toy_example_xor(**kwargs)
        reports.fig_toy_xor(report, outdir / "toy_xor.png")
        for name, entry in report["strategies"].items():
            probs = ", ".join(f"{p:.3f}" for p in entry["bit_probabilities"])
            print(f"{name}: per-bit probabilities [{probs}], "
                  f"target concentration {entry['target_concentration']:.4f}")
    else:
        report = training.toy_example_logistic(**kwargs)
        reports.fig_toy_logistic(report, outdir / "toy_logistic.png")
        for name in ("minloss", "selectr"):
            entry = report[name]
            print(f"{name}: boundary {entry['boundary']:.3f}, "
                  f"accuracy {entry['accuracy']:.0%}")
    reports.write_json(outdir / "toy_report.json", report)
    write_manifest(outdir, f"toy {args.which}", kwargs, kwargs.get("seed", 0))
    return 0


def cmd_analyze(args) -> int:
    edges = parse_bins(args.bins)
    header, theta = network.load_checkpoint(args.checkpoint, NET_TAG)
    net = network.network_from_checkpoint_header(header)
    selector, sel_state = load_selector_checkpoint(args.selector, net)
    dataset = data.load(args.data)
    frac = evaluation.exploratory_fraction(selector, theta, dataset,
                                           state=sel_state)
    rep = _eval_report(net, theta, dataset, edges)
    outdir = _outdir(args, "out/analyze")
    reports.write_jsonl(outdir / "bins.jsonl", reports.bin_rows(rep))
    reports.write_json(outdir / "analysis.json", {
        "exploratory_fraction": frac,
        "overall_accuracy": rep.overall,
        "os_accuracy": rep.os_accuracy,
        "ms_accuracy": rep.ms_accuracy,
    })
    reports.fig_accuracy_vs_solutions(rep, outdir / "accuracy_vs_solutions.png")
    reports.fig_givens_vs_solutions(rep, outdir / "givens_vs_solutions.png")
    write_manifest(outdir, "analyze",
                   {"checkpoint": str(args.checkpoint),
                    "selector": str(args.selector), "data": str(args.data),
                    "bins": [list(e) for e in edges]},
                   header.get("seed"))
    print(f"exploratory fraction: {frac:.4f}")
    return 0


def _load_eval_rows(run_dir) -> list[dict]:
    path = Path(run_dir) / "report.jsonl"
    if not path.exists():
        raise InputError(f"{run_dir} has no report.jsonl (run `multisol eval` first)")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rows.append(json.loads(line))
    return rows


def cmd_compare(args) -> int:
    rows_a = _load_eval_rows(args.run_a)
    rows_b = _load_eval_rows(args.run_b)
    if [r["query"] for r in rows_a] != [r["query"] for r in rows_b]:
        raise InputError("the two runs evaluate different record lists")
    res = evaluation.mcnemar([r["correct"] for r in rows_a],
                             [r["correct"] for r in rows_b])
    outdir = _outdir(args, "out/compare")
    reports.write_json(outdir / "compare.json", {
        "run_a": str(args.run_a), "run_b": str(args.run_b),
        "statistic": res.statistic, "p_value": res.p_value,
        "a_only_correct": res.b, "b_only_correct": res.c,
        "method": res.method,
    })
    write_manifest(outdir, "compare",
                   {"run_a": str(args.run_a), "run_b": str(args.run_b)}, None)
    print(f"McNemar statistic {res.statistic:.4f}, p-value {res.p_value:.4g} "
          f"({res.method}; discordant {res.b}/{res.c})")
    return 0


SWEEP_WEIGHT_DECAYS = (0.0, 1e-5, 1e-4)
SWEEP_COPYITRS = (1, 2500)
SWEEP_RATIOS = ("unique_only", "multi_only", "0.25", "0.5")


def cmd_sweep(args) -> int:
    raw = apply_overrides(parse_kv_file(args.config), args.overrides)
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    cfg, train_ds, dev_ds, test_ds, leftover = _load_train_inputs(raw)
    outdir = _outdir(args, "out/sweep")
    copyitrs = SWEEP_COPYITRS if cfg.strategy == SELECTR else (cfg.copyitr,)
    rows = []
    for wd, ci, ratio in itertools.product(SWEEP_WEIGHT_DECAYS, copyitrs,
                                           SWEEP_RATIOS):
        sub = dataclasses.replace(cfg, weight_decay=wd, copyitr=ci,
                                  ms_upsample_ratio=ratio)
        try:
            sub.validate()
            name = f"wd{wd:g}_ci{ci}_ms{ratio}"
            rundir = outdir / name
            rundir.mkdir(parents=True, exist_ok=True)
            summary = _run_training(sub, train_ds, dev_ds, test_ds, rundir,
                                    {k: leftover[k] for k in leftover})
            row = {"run": name, "weight_decay": wd, "copyitr": ci,
                   "ms_upsample_ratio": ratio,
                   "best_dev_accuracy": summary["best_dev_accuracy"]}
            if "test" in summary:
                row["test_overall"] = summary["test"]["overall"]
            rows.append(row)
            print(f"{name}: dev {summary['best_dev_accuracy']:.3f}")
        except MultisolError as exc:
            rows.append({"run": f"wd{wd:g}_ci{ci}_ms{ratio}", "error": str(exc)})
            print(f"wd{wd:g}_ci{ci}_ms{ratio}: skipped ({exc})")
    reports.write_jsonl(outdir / "sweep_summary.jsonl", rows)
    write_manifest(outdir, "sweep", cfg.echo(), cfg.seed)
    return 0


_COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval,
             "toy": cmd_toy, "analyze": cmd_analyze, "compare": cmd_compare,
             "sweep": cmd_sweep}


_OVERRIDE_COMMANDS = ("gen", "train", "toy", "sweep")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        bad = [tok for tok in extra
               if tok.startswith("-") or "=" not in tok]
        if bad or (extra and args.command not in _OVERRIDE_COMMANDS):
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        args.overrides = extra
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        sys.stderr.write(f"multisol: numeric error: {exc}\n")
        return 2
    except InputError as exc:
        sys.stderr.write(f"multisol: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"multisol: missing file: {exc}\n")
        return 1
    except MultisolError as exc:
        sys.stderr.write(f"multisol: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
