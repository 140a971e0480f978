"""Penalized-runtime scoring: PAR10, per-instance and single best solvers,
per-family complementarity counts, and selector evaluation.

All functions are pure and operate on a RunTable's penalized-median times,
so "best" always means "lowest recorded time, penalties included".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .runner import RunTable


def par10(times) -> float:
    """Arithmetic mean of already-penalized times."""
    arr = np.asarray(times, dtype=float)
    if arr.size == 0:
        raise DomainError("par10 of an empty list is undefined")
    return float(np.mean(arr))


def vbs(table: RunTable) -> tuple[float, np.ndarray]:
    """Perfect per-instance selection: the row minimum, ties to the lowest
    solver index.  Returns (PAR10 of the minima, chosen index per instance)."""
    choices = np.argmin(table.t, axis=1)  # argmin takes the first minimum
    best = table.t[np.arange(len(table.instance_ids)), choices]
    return par10(best), choices


def sbs(table: RunTable) -> int:
    """Index of the single solver with minimal column PAR10; ties to the
    lowest index."""
    col = np.mean(table.t, axis=0)
    return int(np.argmin(col))


@dataclass(frozen=True)
class FamilyStats:
    family: str
    instances: int
    unique: int  # exactly one solver attains the row minimum
    shared: int  # two or more tie for it within tie_tol
    failed: tuple[int, ...]  # per-solver count of unsuccessful pairs
    par10: tuple[float, ...]  # per-solver PAR10 over this family


def _stats_over(family: str, t: np.ndarray, success: np.ndarray, tie_tol: float) -> FamilyStats:
    mins = t.min(axis=1, keepdims=True)
    winners = (t <= mins + tie_tol).sum(axis=1)
    unique = int((winners == 1).sum())
    return FamilyStats(
        family=family,
        instances=t.shape[0],
        unique=unique,
        shared=t.shape[0] - unique,
        failed=tuple(int(c) for c in (~success).sum(axis=0)),
        par10=tuple(float(v) for v in t.mean(axis=0)),
    )


def family_stats(table: RunTable, tie_tol: float = 0.0) -> list[FamilyStats]:
    """Per-family complementarity counts plus a Total row over everything."""
    if tie_tol < 0:
        raise DomainError(f"tie_tol must be >= 0, got {tie_tol}")
    fams = sorted(set(table.families))
    tags = np.asarray(table.families)
    out = []
    for fam in fams:
        mask = tags == fam
        out.append(_stats_over(fam, table.t[mask], table.success[mask], tie_tol))
    out.append(_stats_over("Total", table.t, table.success, tie_tol))
    return out


@dataclass(frozen=True)
class EvalReport:
    par10: float
    avg_rank: float
    impro_pct: float  # strictly better than the single best solver
    notwo_pct: float  # not worse than it
    timeouts: int  # chosen pairs that were failures


def evaluate_selector(table: RunTable, decisions, overhead=None) -> EvalReport:
    """Score a per-instance selector against the single-best-solver baseline.

    Cost per instance is the chosen solver's recorded time plus the
    selection overhead; the overhead is additive only and never pushes a
    successful run into the penalty regime.  Ranks use competition ranking
    (1 + number of strictly faster solvers).  Impro/Notwo compare recorded
    times only, so a zero-overhead copy of the baseline scores exactly
    0% / 100%.
    """
    n, m = table.t.shape
    dec = np.asarray(decisions, dtype=int)
    if dec.shape != (n,):
        raise DomainError(f"need one decision per instance: got {dec.shape}, expected ({n},)")
    if dec.min(initial=0) < 0 or dec.max(initial=0) >= m:
        raise DomainError("decision indices out of range")
    if overhead is None:
        over = np.zeros(n)
    else:
        over = np.asarray(overhead, dtype=float)
        if over.shape != (n,):
            raise DomainError(f"need one overhead per instance: got {over.shape}, expected ({n},)")
        if (over < 0).any():
            raise DomainError("overhead must be nonnegative")
    rows = np.arange(n)
    chosen_t = table.t[rows, dec]
    ranks = 1 + (table.t < chosen_t[:, None]).sum(axis=1)
    baseline = table.t[:, sbs(table)]
    return EvalReport(
        par10=par10(chosen_t + over),
        avg_rank=float(np.mean(ranks)),
        impro_pct=float(100.0 * np.mean(chosen_t < baseline)),
        notwo_pct=float(100.0 * np.mean(chosen_t <= baseline)),
        timeouts=int((~table.success[rows, dec]).sum()),
    )


# --- text reports ------------------------------------------------------------


def format_stats_table(stats: list[FamilyStats], solver_ids: list[str]) -> str:
    """Aligned text: one block per family with Unique/Shared/Failed/PAR10 rows."""
    width = max(len(s) for s in solver_ids)
    head = " ".join(f"{s:>{max(width, 9)}}" for s in solver_ids)
    lines = []
    for st in stats:
        lines.append(f"[{st.family}]  instances={st.instances}  unique={st.unique}  shared={st.shared}")
        lines.append(f"  {'':8s} {head}")
        lines.append("  Failed   " + " ".join(f"{c:>{max(width, 9)}d}" for c in st.failed))
        lines.append("  PAR10    " + " ".join(f"{v:>{max(width, 9)}.3f}" for v in st.par10))
    return "\n".join(lines)


def format_eval_report(name: str, rep: EvalReport) -> str:
    return (
        f"{name:12s} PAR10={rep.par10:.4f}  avg_rank={rep.avg_rank:.2f}  "
        f"impro={rep.impro_pct:.2f}%  notwo={rep.notwo_pct:.2f}%  timeouts={rep.timeouts}"
    )
