"""Heuristic TSP solvers under a deterministic move-evaluation budget.

Runtime is virtual: every candidate-move evaluation costs one tick, and
``time = ticks / cost_rate``.  The budget is checked before each evaluation,
so a run is bit-reproducible for a given (instance, solver, budget, seed)
regardless of host, load, or worker count.  An optional wallclock mode keeps
the same interface but measures elapsed seconds instead.

Outcome law: a successful run reports the moment its best tour reached the
target (time <= cutoff); an unsuccessful run reports exactly the cutoff.
Tour lengths are canonical: math.fsum over the edge-length multiset, so any
rotation or reversal of the same cyclic tour has the identical float64
length, and equality against a reference is meaningful.

Portfolio kinds (all diversify until the budget runs out, so each converges
to the portfolio-wide best value given enough time; what differs is how fast
they get there on a given instance):

* ``nn2opt``       nearest-neighbor construction, first-improvement 2-opt
                   over k-nearest-neighbor candidate lists, double-bridge
                   kicks from the incumbent after each local optimum.
* ``greedy_oropt`` greedy edge-matching construction, Or-opt relocation of
                   segments of length 1..3, double-bridge kicks.
* ``rr2opt``       random construction + 2-opt; on each local optimum either
                   restarts from a fresh random tour (params restart="full")
                   or kicks the incumbent (restart="kick", the default).
* ``anneal``       simulated annealing over 2-opt moves with a geometric
                   schedule fitted to the budget, a 2-opt polish once cold,
                   then reheat and repeat.
* ``external``     command-line adapter; stdout must contain a 1-based
                   ``TOUR: i1 i2 ... in`` line.
"""
from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    InvalidTourError,
    ParameterError,
    ShapeError,
    SizeError,
)
from .instances import Instance, write_tsplib
from .rng import child_rng

KINDS = ("nn2opt", "greedy_oropt", "rr2opt", "anneal", "external")

EXACT_DP_MAX_N = 13
_IMPROVE_EPS = 1e-12  # a move must beat this to count as improving


@dataclass(frozen=True)
class SolverSpec:
    """A named portfolio member: algorithm kind plus tuning parameters."""

    id: str
    kind: str
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown solver kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "external" and "command" not in self.params:
            raise ConfigError("external solver needs a 'command' template parameter")


@dataclass(frozen=True)
class Budget:
    """Termination contract for one run.

    cutoff_s is virtual seconds (deterministic mode) or wall seconds
    (wallclock=True); cost_rate converts evaluations to virtual seconds.
    A run succeeds when its best tour length drops to target_length or
    below before the cutoff.
    """

    cutoff_s: float
    target_length: float
    cost_rate: float = 1e6
    wallclock: bool = False

    def validate(self) -> None:
        if not (self.cutoff_s >= 0.0 and math.isfinite(self.cutoff_s)):
            raise ParameterError(f"cutoff_s must be finite and >= 0, got {self.cutoff_s}")
        if not (self.cost_rate > 0.0 and math.isfinite(self.cost_rate)):
            raise ParameterError(f"cost_rate must be finite and > 0, got {self.cost_rate}")
        if not (self.target_length >= 0.0):
            raise ParameterError(f"target_length must be >= 0, got {self.target_length}")


@dataclass
class SolveOutcome:
    success: bool
    time_s: float
    best_length: float
    best_tour: list[int]
    evaluations: int


def default_portfolio() -> list[SolverSpec]:
    return [
        SolverSpec("anneal", "anneal"),
        SolverSpec("greedy_oropt", "greedy_oropt"),
        SolverSpec("nn2opt", "nn2opt"),
        SolverSpec("rr2opt", "rr2opt"),
    ]


# --- geometry ---------------------------------------------------------------


def _points_of(instance: Instance | np.ndarray) -> np.ndarray:
    pts = instance.points if isinstance(instance, Instance) else np.asarray(instance)
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ShapeError(f"points must be (n, 2), got {pts.shape}")
    if len(pts) < 3:
        raise DomainError(f"need >= 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    return pts


def distance_matrix(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return np.hypot(pts[:, 0, None] - pts[None, :, 0], pts[:, 1, None] - pts[None, :, 1])


def _validate_tour(tour, n: int) -> list[int]:
    t = [int(v) for v in tour]
    if len(t) != n or sorted(t) != list(range(n)):
        raise InvalidTourError(f"tour is not a permutation of 0..{n - 1}")
    return t


def tour_length(instance: Instance | np.ndarray, tour) -> float:
    """Canonical cycle length: exact (fsum) total of float64 edge lengths."""
    pts = _points_of(instance)
    t = _validate_tour(tour, len(pts))
    ordered = pts[t]
    nxt = np.roll(ordered, -1, axis=0)
    edges = np.hypot(ordered[:, 0] - nxt[:, 0], ordered[:, 1] - nxt[:, 1])
    return math.fsum(edges.tolist())


def _fsum_edges(dist: list[list[float]], tour: list[int]) -> float:
    n = len(tour)
    return math.fsum(dist[tour[i]][tour[(i + 1) % n]] for i in range(n))


# --- exact baseline ---------------------------------------------------------


def exact_dp(instance: Instance | np.ndarray) -> tuple[float, list[int]]:
    """Optimal tour by Held-Karp dynamic programming; n <= 13 only."""
    pts = _points_of(instance)
    n = len(pts)
    if n > EXACT_DP_MAX_N:
        raise SizeError(f"exact solver handles n <= {EXACT_DP_MAX_N}, got n = {n}")
    dmat = distance_matrix(pts)
    full = 1 << n
    cost = np.full((full, n), np.inf)
    parent = np.full((full, n), -1, dtype=np.int8)
    cost[1, 0] = 0.0
    all_cities = np.arange(n)
    for mask in range(1, full, 2):  # subsets containing city 0
        row = cost[mask]
        active = np.flatnonzero(np.isfinite(row))
        if active.size == 0:
            continue
        outside = all_cities[(mask >> all_cities) & 1 == 0]
        if outside.size == 0:
            continue
        cand = row[active, None] + dmat[np.ix_(active, outside)]
        pick = np.argmin(cand, axis=0)
        vals = cand[pick, np.arange(outside.size)]
        for k, city in enumerate(outside):
            m2 = mask | (1 << int(city))
            if vals[k] < cost[m2, city]:
                cost[m2, city] = vals[k]
                parent[m2, city] = active[pick[k]]
    final = cost[full - 1] + dmat[:, 0]
    final[0] = np.inf
    last = int(np.argmin(final))
    order = []
    mask, city = full - 1, last
    while city != -1:
        order.append(city)
        nxt_city = int(parent[mask, city])
        mask ^= 1 << city
        city = nxt_city
    tour = order[::-1]
    return _fsum_edges(dmat.tolist(), tour), tour


# --- local-search engine ----------------------------------------------------


class _Exhausted(Exception):
    """Internal: the evaluation budget ran out."""


class _TargetReached(Exception):
    """Internal: the best tour reached the target length."""


class _Search:
    """Shared machinery: budgeted move evaluation over a distance matrix."""

    def __init__(self, pts: np.ndarray, budget: Budget, seed: int, params: dict):
        self.n = len(pts)
        dmat = distance_matrix(pts)
        self.dmat = dmat
        self.dist = dmat.tolist()
        k = min(int(params.get("knn", 10)), self.n - 1)
        order = np.argsort(dmat, axis=1, kind="stable")
        self.cand = [[int(c) for c in order[i] if c != i][:k] for i in range(self.n)]
        self.rng = child_rng(seed)
        self.target = budget.target_length
        self.wallclock = budget.wallclock
        self.cutoff = budget.cutoff_s
        if budget.wallclock:
            self.budget_evals = float("inf")
            self.t0 = _time.monotonic()
        else:
            self.budget_evals = int(budget.cutoff_s * budget.cost_rate)
            self.t0 = 0.0
        self.cost_rate = budget.cost_rate
        self.evals = 0
        self.best_len = math.inf
        self.best_tour: list[int] | None = None
        self.success_evals: int | None = None
        self.success_wall: float | None = None

    # One candidate evaluation; call before computing each move delta.
    def charge(self) -> None:
        if self.evals >= self.budget_evals:
            raise _Exhausted()
        self.evals += 1
        if self.wallclock and self.evals % 1024 == 0:
            if _time.monotonic() - self.t0 >= self.cutoff:
                raise _Exhausted()

    def record(self, tour: list[int]) -> float:
        """Canonical-length bookkeeping for a complete tour."""
        length = _fsum_edges(self.dist, tour)
        if length < self.best_len:
            self.best_len = length
            self.best_tour = list(tour)
            if length <= self.target:
                self.success_evals = self.evals
                self.success_wall = _time.monotonic() - self.t0 if self.wallclock else 0.0
                raise _TargetReached()
        return length

    # -- constructions -----------------------------------------------------

    def nn_tour(self, start: int) -> list[int]:
        n, dist = self.n, self.dist
        visited = [False] * n
        visited[start] = True
        tour = [start]
        cur = start
        budget, evals = self.budget_evals, self.evals
        for _ in range(n - 1):
            row = dist[cur]
            best = -1
            best_d = math.inf
            for c in range(n):
                if visited[c]:
                    continue
                if evals >= budget:
                    self.evals = evals
                    self._fallback_completion(tour, visited)
                    raise _Exhausted()
                evals += 1
                if row[c] < best_d:
                    best_d = row[c]
                    best = c
            tour.append(best)
            visited[best] = True
            cur = best
        self.evals = evals
        if self.wallclock and _time.monotonic() - self.t0 >= self.cutoff:
            self._fallback_completion(tour, [True] * n)
            raise _Exhausted()
        return tour

    def random_tour(self) -> list[int]:
        for _ in range(self.n):  # one tick per city placed
            self.charge()
        return [int(v) for v in self.rng.permutation(self.n)]

    def greedy_tour(self) -> list[int]:
        """Cheapest-edge matching: add edges by ascending length while the
        degree and subtour constraints allow, then close the cycle."""
        n = self.n
        iu, ju = np.triu_indices(n, k=1)
        order = np.argsort(self.dmat[iu, ju], kind="stable")
        deg = [0] * n
        comp = list(range(n))  # union-find over path fragments

        def find(x: int) -> int:
            while comp[x] != x:
                comp[x] = comp[comp[x]]
                x = comp[x]
            return x

        adj: list[list[int]] = [[] for _ in range(n)]
        added = 0
        for e in order:
            if added == n - 1:
                break
            if self.evals >= self.budget_evals:
                self._fallback_from_fragments(adj)
                raise _Exhausted()
            self.evals += 1
            a, b = int(iu[e]), int(ju[e])
            if deg[a] >= 2 or deg[b] >= 2:
                continue
            ra, rb = find(a), find(b)
            if ra == rb:
                continue
            comp[ra] = rb
            adj[a].append(b)
            adj[b].append(a)
            deg[a] += 1
            deg[b] += 1
            added += 1
        ends = [i for i in range(n) if deg[i] <= 1]
        if len(ends) == 2:  # close the cycle (bookkeeping, not a candidate move)
            a, b = ends
            adj[a].append(b)
            adj[b].append(a)
        tour = [0]
        prev = -1
        cur = 0
        for _ in range(n - 1):
            nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
            tour.append(nxt)
            prev, cur = cur, nxt
        return tour

    def _fallback_completion(self, partial: list[int], visited: list[bool]) -> None:
        tour = partial + [c for c in range(self.n) if not visited[c]]
        length = _fsum_edges(self.dist, tour)
        if length < self.best_len:
            self.best_len = length
            self.best_tour = tour

    def _fallback_from_fragments(self, adj: list[list[int]]) -> None:
        n = len(adj)
        used = [False] * n
        tour: list[int] = []
        for s in range(n):
            if used[s] or len(adj[s]) > 1:
                continue
            prev, cur = -1, s  # walk a path fragment from an endpoint
            while True:
                tour.append(cur)
                used[cur] = True
                nxts = [c for c in adj[cur] if c != prev and not used[c]]
                if not nxts:
                    break
                prev, cur = cur, nxts[0]
        for c in range(n):
            if not used[c]:
                tour.append(c)
        length = _fsum_edges(self.dist, tour)
        if length < self.best_len:
            self.best_len = length
            self.best_tour = tour

    # -- perturbation ------------------------------------------------------

    def double_bridge(self, tour: list[int]) -> tuple[list[int], list[int]]:
        """Classic 4-opt kick; returns (new tour, cities incident to new edges)."""
        self.charge()
        n = self.n
        if n < 5:
            return list(tour), list(range(n))
        cuts: set[int] = set()
        while len(cuts) < 3:
            cuts.add(int(self.rng.integers(1, n)))
        a, b, c = sorted(cuts)
        new = tour[:a] + tour[b:c] + tour[a:b] + tour[c:]
        touched = [tour[a - 1], tour[a], tour[b - 1], tour[b], tour[c - 1], tour[c % n]]
        return new, touched

    # -- descents ------------------------------------------------------------

    def two_opt_descent(self, tour: list[int], active: list[int] | None = None) -> list[int]:
        """First-improvement 2-opt restricted to candidate-list pairs.

        For each city a and near candidate c, both successor-edge pairs that
        would introduce edge (a, c) are tried.  Don't-look bits keep converged
        neighborhoods cheap; passing ``active`` limits the initial wake-up set
        (after a kick only the perturbed cities need attention).  Returns at a
        candidate-local optimum.
        """
        n, dist, cand = self.n, self.dist, self.cand
        budget = self.budget_evals
        pos = [0] * n
        for i, city in enumerate(tour):
            pos[city] = i
        dontlook = [active is not None] * n
        if active is not None:
            for city in active:
                dontlook[city] = False
        scanned_any = True
        while scanned_any:
            scanned_any = False
            for a in range(n):
                if dontlook[a]:
                    continue
                scanned_any = True
                improved_here = True
                while improved_here:
                    improved_here = False
                    for c in cand[a]:
                        for shift in (0, 1):
                            if self.evals >= budget:
                                raise _Exhausted()
                            self.evals += 1
                            i = (pos[a] - shift) % n
                            j = (pos[c] - shift) % n
                            if i > j:
                                i, j = j, i
                            if i == j or (i == 0 and j == n - 1):
                                continue
                            t_i, t_i1 = tour[i], tour[i + 1]
                            t_j, t_j1 = tour[j], tour[(j + 1) % n]
                            delta = (
                                dist[t_i][t_j]
                                + dist[t_i1][t_j1]
                                - dist[t_i][t_i1]
                                - dist[t_j][t_j1]
                            )
                            if delta < -_IMPROVE_EPS:
                                tour[i + 1 : j + 1] = tour[i + 1 : j + 1][::-1]
                                for p in range(i + 1, j + 1):
                                    pos[tour[p]] = p
                                for city in (t_i, t_i1, t_j, t_j1):
                                    dontlook[city] = False
                                self.record(tour)
                                improved_here = True
                                break
                        else:
                            continue
                        break
                dontlook[a] = True
        return tour

    def or_opt_descent(self, tour: list[int], active: list[int] | None = None) -> list[int]:
        """First-improvement relocation of segments of length 1..3; insertion
        points come from the segment head's candidate list."""
        n, dist, cand = self.n, self.dist, self.cand
        budget = self.budget_evals
        pos = [0] * n
        for i, city in enumerate(tour):
            pos[city] = i
        dontlook = [active is not None] * n
        if active is not None:
            for city in active:
                dontlook[city] = False
        scanned_any = True
        while scanned_any:
            scanned_any = False
            for head in range(n):
                if dontlook[head]:
                    continue
                scanned_any = True
                moved = True
                while moved:
                    moved = False
                    i = pos[head]
                    for seg_len in (1, 2, 3):
                        if seg_len >= n - 1:
                            break
                        seg = [tour[(i + o) % n] for o in range(seg_len)]
                        tail = seg[-1]
                        prev_city = tour[(i - 1) % n]
                        next_city = tour[(i + seg_len) % n]
                        if next_city == prev_city:
                            continue
                        gain_remove = (
                            dist[prev_city][next_city]
                            - dist[prev_city][head]
                            - dist[tail][next_city]
                        )
                        seg_set = set(seg)
                        done = False
                        for c in cand[head]:
                            if self.evals >= budget:
                                raise _Exhausted()
                            self.evals += 1
                            if c in seg_set or c == prev_city:
                                continue
                            c_next = tour[(pos[c] + 1) % n]
                            if c_next in seg_set:
                                continue
                            delta = gain_remove + (
                                dist[c][head] + dist[tail][c_next] - dist[c][c_next]
                            )
                            if delta < -_IMPROVE_EPS:
                                rest = [city for city in tour if city not in seg_set]
                                at = rest.index(c) + 1
                                tour[:] = rest[:at] + seg + rest[at:]
                                for p, city in enumerate(tour):
                                    pos[city] = p
                                for city in (prev_city, next_city, c, c_next, head, tail):
                                    dontlook[city] = False
                                self.record(tour)
                                moved = True
                                done = True
                                break
                        if done:
                            break
                dontlook[head] = True
        return tour

    def anneal_phase(self, tour: list[int], t0: float, stop_temp: float, period: int, ratio: float) -> None:
        """SA over candidate-list 2-opt moves until temperature hits stop_temp.

        Proposals introduce an edge from a random city to one of its nearest
        neighbors, so move deltas live on the mean-edge scale the temperature
        is calibrated to; uniformly random position pairs would propose long
        chords that are never accepted.
        """
        n, dist, cand = self.n, self.dist, self.cand
        k = len(cand[0])
        budget = self.budget_evals
        rng = self.rng
        pos = [0] * n
        for i, city in enumerate(tour):
            pos[city] = i
        current = _fsum_edges(dist, tour)
        temp = t0
        while temp > stop_temp:
            block = 2048  # draw proposals in blocks to amortize generator overhead
            aa = rng.integers(0, n, block)
            kk = rng.integers(0, k, block)
            uu = rng.random(block)
            for b in range(block):
                if self.evals >= budget:
                    raise _Exhausted()
                self.evals += 1
                if self.evals % period == 0:
                    temp = max(temp * ratio, 1e-300)  # keep exp() finite
                    if temp <= stop_temp:
                        return
                a = int(aa[b])
                c = cand[a][kk[b]]
                i = pos[a]
                j = pos[c]
                if i > j:
                    i, j = j, i
                if i == j or (i == 0 and j == n - 1):
                    continue
                t_i, t_i1 = tour[i], tour[i + 1]
                t_j, t_j1 = tour[j], tour[(j + 1) % n]
                delta = (
                    dist[t_i][t_j] + dist[t_i1][t_j1] - dist[t_i][t_i1] - dist[t_j][t_j1]
                )
                if delta <= 0.0 or uu[b] < math.exp(-delta / temp):
                    tour[i + 1 : j + 1] = tour[i + 1 : j + 1][::-1]
                    for p in range(i + 1, j + 1):
                        pos[tour[p]] = p
                    current += delta
                    if current < self.best_len - 1e-9:
                        current = self.record(tour)  # fsum resync kills drift


# --- drivers ----------------------------------------------------------------


def _drive_nn2opt(search: _Search, params: dict) -> None:
    tour = search.nn_tour(int(search.rng.integers(search.n)))
    search.record(tour)
    search.two_opt_descent(tour)
    while True:
        tour, touched = search.double_bridge(search.best_tour)
        search.two_opt_descent(tour, touched)


def _drive_greedy_oropt(search: _Search, params: dict) -> None:
    tour = search.greedy_tour()
    search.record(tour)
    search.or_opt_descent(tour)
    while True:
        tour, touched = search.double_bridge(search.best_tour)
        search.or_opt_descent(tour, touched)


def _drive_rr2opt(search: _Search, params: dict) -> None:
    restart = str(params.get("restart", "kick"))
    tour = search.random_tour()
    search.record(tour)
    search.two_opt_descent(tour)
    while True:
        if restart == "full":
            tour = search.random_tour()
            search.record(tour)
            search.two_opt_descent(tour)
        else:
            tour, touched = search.double_bridge(search.best_tour)
            search.two_opt_descent(tour, touched)


def _drive_anneal(search: _Search, params: dict) -> None:
    tour = search.nn_tour(int(search.rng.integers(search.n)))
    search.record(tour)
    search.two_opt_descent(tour)
    mean_edge = search.best_len / search.n
    t0 = float(params.get("t0_scale", 0.35)) * mean_edge
    ratio = float(params.get("cool_ratio", 0.995))
    cold_frac = float(params.get("cold_frac", 0.02))
    burst = int(params.get("burst_evals", 40 * search.n))
    drift = float(params.get("drift_tol", 1.02))
    # One cycle = a short reheated quench from t0 down to t0*cold_frac,
    # then a full 2-opt polish of wherever the walk landed.  Short cycles
    # sample many basins per budget; one long quench samples only one.
    steps_to_cold = math.log(cold_frac) / math.log(ratio)
    period = max(1, int(burst / steps_to_cold))
    while True:
        search.anneal_phase(tour, t0, t0 * cold_frac, period, ratio)
        search.two_opt_descent(tour)
        if _fsum_edges(search.dist, tour) > search.best_len * drift:
            tour = list(search.best_tour)  # walk wandered off; re-anchor


_DRIVERS = {
    "nn2opt": _drive_nn2opt,
    "greedy_oropt": _drive_greedy_oropt,
    "rr2opt": _drive_rr2opt,
    "anneal": _drive_anneal,
}


def solve(instance: Instance | np.ndarray, spec: SolverSpec, budget: Budget, seed: int) -> SolveOutcome:
    """Run one solver once under one budget; deterministic in all arguments."""
    spec.validate()
    budget.validate()
    pts = _points_of(instance)
    if spec.kind == "external":
        return _solve_external(instance, spec, budget, seed)
    search = _Search(pts, budget, seed, spec.params)
    try:
        _DRIVERS[spec.kind](search, spec.params)
        raise _Exhausted()  # drivers only return via exceptions
    except _TargetReached:
        if search.wallclock:
            elapsed = min(search.success_wall, budget.cutoff_s)
        else:
            elapsed = search.success_evals / budget.cost_rate
        return SolveOutcome(
            success=True,
            time_s=elapsed,
            best_length=search.best_len,
            best_tour=list(search.best_tour),
            evaluations=search.evals,
        )
    except _Exhausted:
        if search.best_tour is None:
            fallback = list(range(search.n))
            search.best_len = _fsum_edges(search.dist, fallback)
            search.best_tour = fallback
        return SolveOutcome(
            success=False,
            time_s=budget.cutoff_s,
            best_length=search.best_len,
            best_tour=list(search.best_tour),
            evaluations=search.evals,
        )


def _solve_external(instance: Instance | np.ndarray, spec: SolverSpec, budget: Budget, seed: int) -> SolveOutcome:
    """Adapter for out-of-process solvers; failures never raise."""
    pts = _points_of(instance)
    n = len(pts)
    inst = (
        instance
        if isinstance(instance, Instance)
        else Instance(id="external-input", family="unknown", seed=0, points=pts)
    )

    def failed() -> SolveOutcome:
        fallback = list(range(n))
        return SolveOutcome(
            success=False,
            time_s=budget.cutoff_s,
            best_length=tour_length(pts, fallback),
            best_tour=fallback,
            evaluations=0,
        )

    with tempfile.TemporaryDirectory(prefix="tspsel-ext-") as tmp:
        path = Path(tmp) / f"{inst.id}.tsp"
        write_tsplib(inst, path)
        command = spec.params["command"].format(
            instance_path=str(path), cutoff=budget.cutoff_s, seed=seed
        )
        t_start = _time.monotonic()
        try:
            proc = subprocess.run(
                shlex.split(command),
                capture_output=True,
                text=True,
                timeout=max(budget.cutoff_s, 0.001),
            )
        except (subprocess.TimeoutExpired, OSError):
            return failed()
        elapsed = _time.monotonic() - t_start
    if proc.returncode != 0:
        return failed()
    tour = None
    for line in proc.stdout.splitlines():
        line = line.strip()
        if line.startswith("TOUR:"):
            try:
                tour = [int(v) - 1 for v in line[len("TOUR:") :].split()]
            except ValueError:
                return failed()
            break
    if tour is None:
        return failed()
    try:
        length = tour_length(pts, tour)
    except InvalidTourError:
        return failed()
    if length <= budget.target_length and elapsed <= budget.cutoff_s:
        return SolveOutcome(
            success=True,
            time_s=min(elapsed, budget.cutoff_s),
            best_length=length,
            best_tour=tour,
            evaluations=0,
        )
    return SolveOutcome(
        success=False,
        time_s=budget.cutoff_s,
        best_length=length,
        best_tour=tour,
        evaluations=0,
    )
