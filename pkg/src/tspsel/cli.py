"""Command-line surface: generate / run / analyze / train / evaluate.

Every command is a deterministic function of its flags and input files (in
deterministic mode), all randomness flows from explicit --seed flags, and
effective settings resolve as flags > config file > built-in defaults.
Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import FORMATS, __version__
from . import instances as inst
from . import metrics, nn, raster, runner, selector
from .errors import TspselError

_VERSION_TEXT = "tspsel %s (%s)" % (
    __version__,
    ", ".join(f"{k} v{v}" for k, v in sorted(FORMATS.items())),
)


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


class _Settings:
    """Flag values backed by an optional config file, then defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file = {}
        path = self.args.get("config")
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict):
                raise TspselError(f"config file {path} must hold a JSON object")
            self.file = doc

    def get(self, key: str, default):
        flag = self.args.get(key)
        if flag is not None:
            return flag
        if key in self.file:
            return self.file[key]
        return default


def _load_portfolio(path: str | None):
    from .solvers import SolverSpec, default_portfolio

    if path is None:
        return default_portfolio()
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list) or not doc:
        raise TspselError(f"portfolio file {path} must hold a nonempty JSON list")
    specs = []
    for row in doc:
        specs.append(SolverSpec(id=str(row["id"]), kind=str(row["kind"]), params=dict(row.get("params", {}))))
        specs[-1].validate()
    return specs


# --- generate ----------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    s = _Settings(args)
    family = s.get("family", "all")
    count = int(s.get("count", 20))
    n_min = int(s.get("n_min", 50))
    n_max = int(s.get("n_max", 200))
    seed = int(s.get("seed", 0))
    out = s.get("out", None)
    if out is None:
        _err("generate needs --out DIR")
        return 2
    families = list(inst.FAMILIES) if family == "all" else [family]
    os.makedirs(out, exist_ok=True)
    written = []
    for fam in families:
        spec = inst.GenSpec(family=fam, count=count, n_min=n_min, n_max=n_max, seed=seed)
        for instance in inst.generate(spec):
            path = os.path.join(out, f"{instance.id}.tsp")
            inst.write_tsplib(instance, path)
            written.append(path)
    manifest = {
        "command": "generate",
        "config": {"family": family, "count": count, "n_min": n_min, "n_max": n_max, "seed": seed},
        "files": {os.path.basename(p): runner.file_sha256(p) for p in sorted(written)},
        "version": _VERSION_TEXT,
    }
    with open(os.path.join(out, "manifest.json"), "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(written)} instances to {out}")
    return 0


# --- run ---------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    s = _Settings(args)
    corpus_dir = s.get("corpus", None)
    out = s.get("out", None)
    if corpus_dir is None or out is None:
        _err("run needs --corpus DIR and --out CSV")
        return 2
    if not os.path.isdir(corpus_dir):
        _err(f"corpus directory {corpus_dir!r} does not exist")
        return 2
    config = runner.RunConfig(
        reps=int(s.get("reps", 5)),
        cutoff_s=float(s.get("cutoff", 900.0)),
        penalty_factor=float(s.get("penalty_factor", 10.0)),
        mode=s.get("mode", "deterministic"),
        seed=int(s.get("seed", 0)),
        cost_rate=float(s.get("cost_rate", 1e6)),
        target_gap=float(s.get("target_gap", 0.0)),
    )
    config.validate()
    oracle_mult = float(s.get("oracle_mult", 10.0))
    workers = int(s.get("workers", 0)) or (os.cpu_count() or 1)
    corpus = inst.read_corpus(corpus_dir)
    solvers = _load_portfolio(s.get("portfolio", None))

    refs_path = out + ".refs.json"
    resume = bool(s.get("resume", False))
    if resume and os.path.exists(refs_path):
        references = runner.load_references(refs_path)
        missing = [i.id for i in corpus if i.id not in references]
        if missing:
            _err(f"reference file {refs_path} lacks {len(missing)} instances; rerun without --resume")
            return 1
        print(f"reusing references from {refs_path}")
    else:
        print(f"computing references ({len(corpus)} instances x {len(solvers)} solvers, x{oracle_mult:g} budget)")
        references = runner.oracle_pass(corpus, solvers, config, budget_multiplier=oracle_mult, workers=workers)
        runner.save_references(references, refs_path)
    existing = None
    if resume and os.path.exists(out):
        try:
            existing = runner.load_csv(out)
            print(f"resuming: {len(existing.instance_ids)} instances already recorded")
        except TspselError as exc:
            _err(f"cannot resume from {out}: {exc}")
            return 1

    def progress(done, total):
        if done % 25 == 0 or done == total:
            print(f"  {done}/{total} pairs", flush=True)

    table = runner.run_portfolio(corpus, solvers, config, references, existing=existing, workers=workers, progress=progress)
    runner.save_csv(table, out)
    runner.save_manifest(
        out + ".manifest.json",
        config,
        solvers,
        references,
        [os.path.join(corpus_dir, f) for f in sorted(os.listdir(corpus_dir)) if f.endswith(".tsp")],
    )
    print(f"wrote run table {out} ({len(table.instance_ids)} instances x {len(table.solver_ids)} solvers)")
    return 0


# --- analyze -----------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    s = _Settings(args)
    path = s.get("table", None)
    if path is None:
        _err("analyze needs --table CSV")
        return 2
    table = runner.load_csv(path)
    tie_tol = float(s.get("tie_tol", 0.0))
    stats = metrics.family_stats(table, tie_tol)
    print(metrics.format_stats_table(stats, table.solver_ids))
    vbs_par, choices = metrics.vbs(table)
    sbs_idx = metrics.sbs(table)
    sbs_par = float(np.mean(table.t[:, sbs_idx]))
    print(f"\nVBS PAR10 = {vbs_par:.6f}")
    print(f"SBS = {table.solver_ids[sbs_idx]} with PAR10 = {sbs_par:.6f}")
    scatter = s.get("scatter", None)
    if scatter:
        lines = ["instance_id,family,vbs_time,sbs_time," + ",".join(table.solver_ids)]
        for i, iid in enumerate(table.instance_ids):
            row = table.t[i]
            cells = [iid, table.families[i], f"{row[choices[i]]:.17g}", f"{row[sbs_idx]:.17g}"]
            cells += [f"{v:.17g}" for v in row]
            lines.append(",".join(cells))
        with open(scatter, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote scatter rows for {len(table.instance_ids)} instances to {scatter}")
    return 0


# --- train -------------------------------------------------------------------


def _examples_from(table, corpus_dir: str):
    corpus = {i.id: i for i in inst.read_corpus(corpus_dir)}
    missing = [iid for iid in table.instance_ids if iid not in corpus]
    if missing:
        raise TspselError(f"corpus lacks {len(missing)} instances from the table (first: {missing[0]})")
    return [
        selector.LabeledExample(corpus[iid], table.t[i])
        for i, iid in enumerate(table.instance_ids)
    ]


_STRATEGY_ALIASES = {"cla": "classification", "reg": "regression"}


def cmd_train(args: argparse.Namespace) -> int:
    s = _Settings(args)
    table_path = s.get("table", None)
    corpus_dir = s.get("corpus", None)
    out = s.get("out", None)
    if table_path is None or corpus_dir is None or out is None:
        _err("train needs --table CSV, --corpus DIR and --out CKPT")
        return 2
    strategy = _STRATEGY_ALIASES.get(s.get("strategy", "cla"), s.get("strategy", "cla"))
    table = runner.load_csv(table_path)
    examples = _examples_from(table, corpus_dir)
    split_seed = int(s.get("split_seed", 0))
    train_frac = float(s.get("train_fraction", 0.7))
    train_set, _ = selector.split(examples, selector.SplitSpec(train_frac, split_seed))
    input_side = int(s.get("input_side", 64))
    model_config = nn.ModelConfig(input_side=input_side, outputs=len(table.solver_ids))
    tc = selector.TrainConfig(
        strategy=strategy,
        epochs=int(s.get("epochs", 50)),
        batch=int(s.get("batch", 64)),
        lr=float(s.get("lr", 1e-4)),
        decay_rate=float(s.get("decay_rate", 0.9)),
        patience=int(s.get("patience", 10)),
        alpha=float(s.get("alpha", 0.5)),
        label_mode=s.get("label_mode", "hard"),
        tau=float(s.get("tau", 1.0)),
        target_transform=s.get("transform", "log10"),
        augment=raster.AugmentConfig(d=int(s.get("d", 0)), flip=bool(s.get("flip", False))),
        seed=int(s.get("seed", 0)),
    )
    print(f"training {strategy} selector on {len(train_set)} instances ({tc.epochs} epochs)")

    def on_epoch(epoch, loss, lr):
        print(f"  epoch {epoch + 1:3d}: loss {loss:.6f} lr {lr:.2e}", flush=True)

    model = selector.train(
        train_set,
        model_config,
        tc,
        rc=raster.RasterConfig(c=input_side),
        solver_ids=table.solver_ids,
        on_epoch=on_epoch,
    )
    extra = {
        "strategy": model.strategy,
        "target_transform": model.target_transform,
        "solver_ids": model.solver_ids,
        "raster_c": model.raster_config.c,
        "split": {"seed": split_seed, "train_fraction": train_frac},
        "epoch_losses": model.epoch_losses,
        "table_sha256": runner.file_sha256(table_path),
    }
    nn.save_checkpoint(out, model.config, model.params, extra)
    print(f"wrote checkpoint {out}")
    return 0


# --- evaluate ----------------------------------------------------------------


def cmd_evaluate(args: argparse.Namespace) -> int:
    s = _Settings(args)
    model_path = s.get("model", None)
    table_path = s.get("table", None)
    corpus_dir = s.get("corpus", None)
    if model_path is None or table_path is None or corpus_dir is None:
        _err("evaluate needs --model CKPT, --table CSV and --corpus DIR")
        return 2
    config, params, extra = nn.load_checkpoint(model_path)
    table = runner.load_csv(table_path)
    if config.outputs != len(table.solver_ids):
        _err(
            f"checkpoint predicts {config.outputs} solvers but the table has {len(table.solver_ids)}"
        )
        return 2
    model = selector.SelectorModel(
        config=config,
        params=params,
        strategy=extra.get("strategy", "classification"),
        target_transform=extra.get("target_transform", "log10"),
        raster_config=raster.RasterConfig(c=extra.get("raster_c", config.input_side)),
        solver_ids=extra.get("solver_ids", table.solver_ids),
    )
    examples = _examples_from(table, corpus_dir)
    split_cfg = extra.get("split", {})
    split_seed = int(s.get("split_seed", split_cfg.get("seed", 0)))
    train_frac = float(s.get("train_fraction", split_cfg.get("train_fraction", 0.7)))
    train_set, test_set = selector.split(examples, selector.SplitSpec(train_frac, split_seed))
    if not test_set:
        _err("test split is empty")
        return 1
    cost_rate = float(s.get("cost_rate", 1e6))

    test_ids = [ex.instance.id for ex in test_set]
    index_of = {iid: i for i, iid in enumerate(table.instance_ids)}
    rows = [index_of[iid] for iid in test_ids]
    sub = runner.RunTable(
        instance_ids=test_ids,
        families=[table.families[i] for i in rows],
        solver_ids=table.solver_ids,
        t=table.t[rows],
        success=table.success[rows],
        cutoff_s=table.cutoff_s,
        penalty_factor=table.penalty_factor,
    )

    decisions = []
    overheads = []
    for ex in test_set:
        decisions.append(selector.select(model, ex.instance))
        overheads.append(selector.selection_overhead(ex.instance, cost_rate))
    rep = metrics.evaluate_selector(sub, decisions, overheads)
    print(metrics.format_eval_report(f"cnn-{model.strategy[:3]}", rep))

    sbs_idx = metrics.sbs(sub)
    rep_sbs = metrics.evaluate_selector(sub, [sbs_idx] * len(test_set))
    print(metrics.format_eval_report(f"sbs={sub.solver_ids[sbs_idx]}", rep_sbs))
    _, vbs_choices = metrics.vbs(sub)
    rep_vbs = metrics.evaluate_selector(sub, vbs_choices)
    print(metrics.format_eval_report("vbs", rep_vbs))

    if s.get("baseline", None) == "knn":
        k = int(s.get("k", 5))
        knn = selector.KnnBaseline(train_set, k=k, cost_rate=cost_rate)
        kdec, kover = [], []
        for ex in test_set:
            choice, overhead = knn.select(ex.instance, cost_rate)
            kdec.append(choice)
            kover.append(overhead)
        rep_knn = metrics.evaluate_selector(sub, kdec, kover)
        print(metrics.format_eval_report(f"knn-k{k}", rep_knn))
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tspsel",
        description="Benchmark a TSP heuristic portfolio and train a per-instance solver selector.",
    )
    parser.add_argument("--version", action="version", version=_VERSION_TEXT)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON file with defaults for any flag of this command")
        p.add_argument("--seed", type=int, help="master seed (default 0)")

    g = sub.add_parser("generate", help="write a TSPLIB instance corpus")
    add_common(g)
    g.add_argument("--family", choices=list(inst.FAMILIES) + ["all"], help="point-placement family (default all)")
    g.add_argument("--count", type=int, help="instances per family (default 20)")
    g.add_argument("--n-min", dest="n_min", type=int, help="smallest city count (default 50)")
    g.add_argument("--n-max", dest="n_max", type=int, help="largest city count (default 200)")
    g.add_argument("--out", help="output directory")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="benchmark the portfolio and write the run table")
    add_common(r)
    r.add_argument("--corpus", help="directory of .tsp files")
    r.add_argument("--portfolio", help="JSON list of solver specs (default: built-in portfolio)")
    r.add_argument("--reps", type=int, help="runs per (instance, solver) pair (default 5)")
    r.add_argument("--cutoff", type=float, help="per-run cutoff in virtual seconds (default 900)")
    r.add_argument("--penalty-factor", dest="penalty_factor", type=float, help="failure penalty multiple (default 10)")
    r.add_argument("--mode", choices=["deterministic", "wallclock"], help="time source (default deterministic)")
    r.add_argument("--cost-rate", dest="cost_rate", type=float, help="evaluations per virtual second (default 1e6)")
    r.add_argument("--target-gap", dest="target_gap", type=float, help="relative slack on the reference (default 0)")
    r.add_argument("--oracle-mult", dest="oracle_mult", type=float, help="reference-pass budget multiplier (default 10)")
    r.add_argument("--workers", type=int, help="process count (default: all cores)")
    r.add_argument("--resume", action="store_const", const=True, help="reuse existing references and table rows")
    r.add_argument("--out", help="output CSV path")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="per-family statistics and VBS/SBS summary")
    add_common(a)
    a.add_argument("--table", help="run table CSV")
    a.add_argument("--tie-tol", dest="tie_tol", type=float, help="absolute tie tolerance (default 0)")
    a.add_argument("--scatter", help="write per-instance times CSV here")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("train", help="train the selector CNN on the train split")
    add_common(t)
    t.add_argument("--table", help="run table CSV")
    t.add_argument("--corpus", help="directory of .tsp files")
    t.add_argument("--strategy", choices=["cla", "reg", "classification", "regression"], help="selection strategy (default cla)")
    t.add_argument("--epochs", type=int, help="training epochs (default 50)")
    t.add_argument("--batch", type=int, help="mini-batch size (default 64)")
    t.add_argument("--lr", type=float, help="Adam learning rate (default 1e-4)")
    t.add_argument("--decay-rate", dest="decay_rate", type=float, help="plateau lr multiplier (default 0.9)")
    t.add_argument("--patience", type=int, help="plateau epochs before decay (default 10)")
    t.add_argument("--alpha", type=float, help="instance weight exponent on times (default 0.5)")
    t.add_argument("--label-mode", dest="label_mode", choices=["hard", "soft"], help="classification label (default hard)")
    t.add_argument("--tau", type=float, help="soft-label temperature (default 1.0)")
    t.add_argument("--transform", choices=["raw", "log10"], help="regression target transform (default log10)")
    t.add_argument("--d", type=int, help="rotation divisor for augmentation (default 0 = off)")
    t.add_argument("--flip", action="store_const", const=True, help="enable flip augmentation")
    t.add_argument("--input-side", dest="input_side", type=int, help="density-map side in pixels (default 64)")
    t.add_argument("--split-seed", dest="split_seed", type=int, help="train/test split seed (default 0)")
    t.add_argument("--train-fraction", dest="train_fraction", type=float, help="train share (default 0.7)")
    t.add_argument("--out", help="checkpoint path")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a trained selector on the held-out split")
    add_common(e)
    e.add_argument("--model", help="checkpoint path")
    e.add_argument("--table", help="run table CSV")
    e.add_argument("--corpus", help="directory of .tsp files")
    e.add_argument("--split-seed", dest="split_seed", type=int, help="split seed (default: from checkpoint)")
    e.add_argument("--train-fraction", dest="train_fraction", type=float, help="train share (default: from checkpoint)")
    e.add_argument("--cost-rate", dest="cost_rate", type=float, help="evaluations per virtual second (default 1e6)")
    e.add_argument("--baseline", choices=["knn"], help="also score this baseline")
    e.add_argument("--k", type=int, help="baseline neighbor count (default 5)")
    e.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TspselError as exc:
        _err(str(exc))
        return 1
    except OSError as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
