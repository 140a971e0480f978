"""Portfolio benchmarking: repeated seeded runs, penalized-median aggregation,
and persistent run tables.

A run "succeeds" when the solver reaches the per-instance reference length
within the cutoff.  References come from :func:`oracle_pass` -- the exact
optimum where dynamic programming is feasible, otherwise the best length any
portfolio member finds under a multiplied budget.  Unsuccessful runs are
charged ``penalty_factor * cutoff`` before the median, so a pair's recorded
time is ``penalty_factor * cutoff`` exactly whenever the majority of its reps
failed.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ParameterError, ParseError
from .instances import Instance
from .rng import derive_seed
from .solvers import EXACT_DP_MAX_N, Budget, SolverSpec, exact_dp, solve

_CSV_HEADER = "instance_id,family,solver_id,median_time_s,success"


@dataclass(frozen=True)
class RunConfig:
    """Protocol knobs for one benchmarking campaign."""

    reps: int = 5
    cutoff_s: float = 900.0
    penalty_factor: float = 10.0
    mode: str = "deterministic"  # or "wallclock"
    seed: int = 0
    cost_rate: float = 1e6  # candidate evaluations per virtual second
    target_gap: float = 0.0  # success bar = reference * (1 + target_gap)

    def validate(self) -> None:
        if self.reps < 1:
            raise ParameterError(f"reps must be >= 1, got {self.reps}")
        if not (self.cutoff_s > 0 and math.isfinite(self.cutoff_s)):
            raise ParameterError(f"cutoff_s must be finite and > 0, got {self.cutoff_s}")
        if self.penalty_factor < 1:
            raise ParameterError(f"penalty_factor must be >= 1, got {self.penalty_factor}")
        if self.mode not in ("deterministic", "wallclock"):
            raise ParameterError(f"mode must be deterministic or wallclock, got {self.mode!r}")
        if not (self.cost_rate > 0 and math.isfinite(self.cost_rate)):
            raise ParameterError(f"cost_rate must be finite and > 0, got {self.cost_rate}")
        if not (self.target_gap >= 0 and math.isfinite(self.target_gap)):
            raise ParameterError(f"target_gap must be finite and >= 0, got {self.target_gap}")

    @property
    def penalty_s(self) -> float:
        return self.penalty_factor * self.cutoff_s


@dataclass(frozen=True)
class RunRecord:
    """One solver run on one instance."""

    instance_id: str
    solver_id: str
    rep: int
    success: bool
    time_s: float  # virtual seconds (deterministic mode) or wall seconds
    best_length: float


@dataclass(eq=False)
class RunTable:
    """Median penalized times for every (instance, solver) pair.

    Rows follow ``instance_ids`` (lexicographic), columns follow
    ``solver_ids`` (lexicographic).  ``t[i, j]`` is the lower median of the
    pair's penalized per-run times; ``success[i, j]`` says whether at least
    half the reps succeeded -- by construction that is also the status of the
    median run.
    """

    instance_ids: list[str]
    families: list[str]
    solver_ids: list[str]
    t: np.ndarray
    success: np.ndarray
    cutoff_s: float
    penalty_factor: float = 10.0

    def validate(self) -> None:
        n, m = len(self.instance_ids), len(self.solver_ids)
        if self.t.shape != (n, m) or self.success.shape != (n, m):
            raise DomainError(
                f"table shapes {self.t.shape}/{self.success.shape} do not match {n} instances x {m} solvers"
            )
        if len(self.families) != n:
            raise DomainError("family tag count does not match instance count")
        penalty = self.penalty_factor * self.cutoff_s
        bad = ~self.success & (self.t != penalty)
        if bad.any():
            raise DomainError("failed pairs must record exactly penalty_factor * cutoff")
        over = self.success & (self.t > self.cutoff_s)
        if over.any():
            raise DomainError("successful pairs must record times within the cutoff")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunTable):
            return NotImplemented
        return (
            self.instance_ids == other.instance_ids
            and self.families == other.families
            and self.solver_ids == other.solver_ids
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.success, other.success)
            and self.cutoff_s == other.cutoff_s
            and self.penalty_factor == other.penalty_factor
        )

    def column(self, solver_id: str) -> np.ndarray:
        return self.t[:, self.solver_ids.index(solver_id)]


def _canonical(instances: list[Instance], solvers: list[SolverSpec]) -> tuple[list[Instance], list[SolverSpec]]:
    ids = [i.id for i in instances]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate instance ids in corpus")
    sids = [s.id for s in solvers]
    if len(set(sids)) != len(sids):
        raise ConfigError("duplicate solver ids in portfolio")
    return sorted(instances, key=lambda i: i.id), sorted(solvers, key=lambda s: s.id)


# --- reference lengths -------------------------------------------------------


def _oracle_task(payload) -> tuple[int, float]:
    idx, points, specs, cutoff, cost_rate, wallclock, seeds = payload
    n = len(points)
    if n <= EXACT_DP_MAX_N:
        length, _ = exact_dp(points)
        return idx, length
    budget = Budget(cutoff_s=cutoff, target_length=0.0, cost_rate=cost_rate, wallclock=wallclock)
    best = math.inf
    for spec, seed in zip(specs, seeds):
        out = solve(points, spec, budget, seed)
        best = min(best, out.best_length)
    return idx, best


def oracle_pass(
    instances: list[Instance],
    solvers: list[SolverSpec],
    config: RunConfig,
    budget_multiplier: float = 10.0,
    workers: int = 1,
) -> dict[str, float]:
    """Best length any solver attains under a stretched budget, per instance.

    Target length 0 means no run can terminate early, so every solver spends
    the full multiplied cutoff.  Instances small enough for exact dynamic
    programming use the true optimum instead.  Deterministic in (config.seed,
    instance id, solver id) regardless of worker count.
    """
    config.validate()
    if budget_multiplier < 1:
        raise ParameterError(f"budget_multiplier must be >= 1, got {budget_multiplier}")
    insts, specs = _canonical(instances, solvers)
    wallclock = config.mode == "wallclock"
    payloads = []
    for idx, inst in enumerate(insts):
        seeds = [derive_seed(config.seed, "reference", inst.id, s.id) for s in specs]
        payloads.append(
            (idx, inst.points, specs, config.cutoff_s * budget_multiplier, config.cost_rate, wallclock, seeds)
        )
    results = _run_tasks(_oracle_task, payloads, workers)
    refs: dict[str, float] = {}
    for idx, length in results:
        refs[insts[idx].id] = length
    return refs


def save_references(refs: dict[str, float], path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump({k: refs[k] for k in sorted(refs)}, fh, indent=1)
        fh.write("\n")


def load_references(path: str) -> dict[str, float]:
    with open(path, "r", encoding="ascii") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: reference file must hold an object of id -> length")
    return {str(k): float(v) for k, v in raw.items()}


# --- the campaign ------------------------------------------------------------


def _pair_task(payload) -> tuple[int, float, bool, list]:
    idx, points, spec, reps, cutoff, penalty, target, cost_rate, wallclock, seeds = payload
    budget = Budget(cutoff_s=cutoff, target_length=target, cost_rate=cost_rate, wallclock=wallclock)
    times = []
    raw = []
    successes = 0
    for rep in range(reps):
        out = solve(points, spec, budget, seeds[rep])
        penalized = out.time_s if out.success else penalty
        times.append(penalized)
        successes += out.success
        raw.append((rep, out.success, out.time_s, out.best_length))
    t_med = sorted(times)[(reps - 1) // 2]  # lower median: follows the majority side
    ok = successes >= (reps + 1) // 2
    return idx, t_med, ok, raw


def run_portfolio(
    instances: list[Instance],
    solvers: list[SolverSpec],
    config: RunConfig,
    references: dict[str, float],
    existing: RunTable | None = None,
    workers: int = 1,
    progress=None,
) -> RunTable:
    """Benchmark every solver on every instance; reps runs per pair.

    A run succeeds when it reaches ``reference * (1 + target_gap)`` within
    the cutoff; the default gap of zero demands the reference length itself.
    Seeds derive from (config.seed, instance id, solver id, rep), so the
    result is a pure function of the inputs -- independent of worker count,
    execution order, and any prior partial results.  ``existing`` rows (from
    an interrupted campaign's CSV) are trusted and skipped.
    """
    config.validate()
    insts, specs = _canonical(instances, solvers)
    for inst in insts:
        if inst.id not in references:
            raise ConfigError(f"no reference length for instance {inst.id!r}")
    done: dict[tuple[str, str], tuple[float, bool]] = {}
    if existing is not None:
        if existing.cutoff_s != config.cutoff_s or existing.penalty_factor != config.penalty_factor:
            raise ConfigError("resume table was produced under a different cutoff or penalty")
        for i, iid in enumerate(existing.instance_ids):
            for j, sid in enumerate(existing.solver_ids):
                done[(iid, sid)] = (float(existing.t[i, j]), bool(existing.success[i, j]))
    wallclock = config.mode == "wallclock"
    n, m = len(insts), len(specs)
    t = np.zeros((n, m))
    success = np.zeros((n, m), dtype=bool)
    payloads = []
    slots = []
    for i, inst in enumerate(insts):
        for j, spec in enumerate(specs):
            key = (inst.id, spec.id)
            if key in done:
                t[i, j], success[i, j] = done[key]
                continue
            seeds = [derive_seed(config.seed, inst.id, spec.id, rep) for rep in range(config.reps)]
            payloads.append(
                (
                    len(slots),
                    inst.points,
                    spec,
                    config.reps,
                    config.cutoff_s,
                    config.penalty_s,
                    references[inst.id] * (1.0 + config.target_gap),
                    config.cost_rate,
                    wallclock,
                    seeds,
                )
            )
            slots.append((i, j))
    results = _run_tasks(_pair_task, payloads, workers, progress)
    for idx, t_med, ok, _raw in results:
        i, j = slots[idx]
        t[i, j] = t_med
        success[i, j] = ok
    table = RunTable(
        instance_ids=[i.id for i in insts],
        families=[i.family for i in insts],
        solver_ids=[s.id for s in specs],
        t=t,
        success=success,
        cutoff_s=config.cutoff_s,
        penalty_factor=config.penalty_factor,
    )
    table.validate()
    return table


def _run_tasks(fn, payloads, workers: int, progress=None):
    """Map fn over payloads, optionally in a process pool; order-stable."""
    if workers <= 1 or len(payloads) <= 1:
        out = []
        for p in payloads:
            out.append(fn(p))
            if progress is not None:
                progress(len(out), len(payloads))
        return out
    with multiprocessing.get_context("fork").Pool(workers) as pool:
        out = []
        for res in pool.imap(fn, payloads, chunksize=1):
            out.append(res)
            if progress is not None:
                progress(len(out), len(payloads))
    return out


# --- persistence -------------------------------------------------------------


def save_csv(table: RunTable, path: str) -> None:
    """Write the run table; one row per (instance, solver) pair.

    The leading comment line carries the cutoff and penalty factor so the
    file round-trips to an identical table.
    """
    lines = [f"# cutoff_s={table.cutoff_s!r} penalty_factor={table.penalty_factor!r}", _CSV_HEADER]
    for i, iid in enumerate(table.instance_ids):
        for j, sid in enumerate(table.solver_ids):
            flag = "true" if table.success[i, j] else "false"
            lines.append(f"{iid},{table.families[i]},{sid},{table.t[i, j]:.17g},{flag}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path: str) -> RunTable:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    cutoff, penalty = None, None
    rows: dict[str, dict[str, tuple[float, bool]]] = {}
    families: dict[str, str] = {}
    solver_ids: list[str] = []
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                key, _, value = token.partition("=")
                if key == "cutoff_s":
                    cutoff = float(value)
                elif key == "penalty_factor":
                    penalty = float(value)
            continue
        if not header_seen:
            if line != _CSV_HEADER:
                raise ParseError(f"expected header {_CSV_HEADER!r}", line=lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"expected 5 comma-separated fields, got {len(parts)}", line=lineno)
        iid, family, sid, time_text, flag = parts
        try:
            t_val = float(time_text)
        except ValueError:
            raise ParseError(f"bad time value {time_text!r}", line=lineno) from None
        if flag not in ("true", "false"):
            raise ParseError(f"success must be true or false, got {flag!r}", line=lineno)
        if iid in families and families[iid] != family:
            raise ParseError(f"instance {iid!r} listed under two families", line=lineno)
        families[iid] = family
        if sid not in solver_ids:
            solver_ids.append(sid)
        per = rows.setdefault(iid, {})
        if sid in per:
            raise ParseError(f"duplicate row for ({iid!r}, {sid!r})", line=lineno)
        per[sid] = (t_val, flag == "true")
    if not header_seen:
        raise ParseError("no header row found", line=1)
    if not rows:
        raise ParseError("no data rows found", line=len(lines))
    if cutoff is None:
        cutoff = max(max(v[0] for v in per.values()) for per in rows.values())
        penalty = 10.0 if penalty is None else penalty
    if penalty is None:
        penalty = 10.0
    instance_ids = sorted(rows)
    solver_ids = sorted(solver_ids)
    n, m = len(instance_ids), len(solver_ids)
    t = np.zeros((n, m))
    success = np.zeros((n, m), dtype=bool)
    for i, iid in enumerate(instance_ids):
        per = rows[iid]
        missing = set(solver_ids) - set(per)
        if missing:
            raise ParseError(f"instance {iid!r} lacks rows for solvers {sorted(missing)}")
        for j, sid in enumerate(solver_ids):
            t[i, j], success[i, j] = per[sid]
    table = RunTable(
        instance_ids=instance_ids,
        families=[families[i] for i in instance_ids],
        solver_ids=solver_ids,
        t=t,
        success=success,
        cutoff_s=cutoff,
        penalty_factor=penalty,
    )
    table.validate()
    return table


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_manifest(
    path: str,
    config: RunConfig,
    solvers: list[SolverSpec],
    references: dict[str, float],
    corpus_paths: list[str],
) -> None:
    """Record everything needed to re-derive a run table byte-for-byte."""
    doc = {
        "config": {
            "reps": config.reps,
            "cutoff_s": config.cutoff_s,
            "penalty_factor": config.penalty_factor,
            "mode": config.mode,
            "seed": config.seed,
            "cost_rate": config.cost_rate,
            "target_gap": config.target_gap,
        },
        "portfolio": [{"id": s.id, "kind": s.kind, "params": s.params} for s in sorted(solvers, key=lambda s: s.id)],
        "references": {k: references[k] for k in sorted(references)},
        "corpus": {os.path.basename(p): file_sha256(p) for p in sorted(corpus_paths)},
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
