"""Euclidean TSP instance families and TSPLIB-subset file I/O.

Six generator families produce point sets in the unit square.  Every family
draws from a per-instance PCG64 stream (``child_rng(seed, index)``), so
instance ``i`` of a request is the same no matter how many workers produced
the corpus or in which order.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ParseError, SpecificationError
from .rng import child_rng

FAMILIES = ("rue", "explosion", "implosion", "expansion", "cluster", "grid")

# Family process constants; all overridable per-request through GenSpec.params.
DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "rue": {},
    "explosion": {"radius": 0.25, "strength": 0.1},
    "implosion": {"radius": 0.3, "pull": 0.3},
    "expansion": {"seg_length": 0.6, "corridor": 0.1, "strength": 0.15},
    "cluster": {"k_min": 3, "k_max": 8, "sigma": 0.03},
    "grid": {"jitter_scale": 0.1},
}


@dataclass(frozen=True)
class GenSpec:
    """Request for a batch of instances from one family."""

    family: str
    count: int
    n_min: int = 50
    n_max: int = 200
    seed: int = 0
    params: dict[str, float] = field(default_factory=dict)


@dataclass
class Instance:
    """A Euclidean TSP instance: an ordered point set in the plane."""

    id: str
    family: str
    seed: int
    points: np.ndarray  # (n, 2) float64

    @property
    def n(self) -> int:
        return len(self.points)

    def validate(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise SpecificationError(f"points must be (n, 2), got {pts.shape}")
        if len(pts) < 3:
            raise SpecificationError(f"instance needs >= 3 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise SpecificationError("points must be finite")
        if np.all(pts == pts[0]):
            raise SpecificationError("all points identical")


def _check_spec(spec: GenSpec) -> dict[str, float]:
    if spec.family not in FAMILIES:
        raise SpecificationError(f"unknown family {spec.family!r}; expected one of {FAMILIES}")
    if spec.count < 0:
        raise SpecificationError(f"count must be >= 0, got {spec.count}")
    if not (3 <= spec.n_min <= spec.n_max):
        raise SpecificationError(f"need 3 <= n_min <= n_max, got [{spec.n_min}, {spec.n_max}]")
    params = dict(DEFAULT_PARAMS[spec.family])
    for key, value in spec.params.items():
        if key not in params:
            raise ParameterError(f"family {spec.family!r} has no parameter {key!r}")
        params[key] = value
    if spec.family == "explosion":
        if params["radius"] <= 0 or params["strength"] <= 0:
            raise ParameterError("explosion requires radius > 0 and strength > 0")
    elif spec.family == "implosion":
        if params["radius"] <= 0 or not (0.0 <= params["pull"] <= 1.0):
            raise ParameterError("implosion requires radius > 0 and 0 <= pull <= 1")
    elif spec.family == "expansion":
        if params["seg_length"] <= 0 or params["corridor"] <= 0 or params["strength"] <= 0:
            raise ParameterError("expansion requires positive seg_length, corridor, strength")
    elif spec.family == "cluster":
        k_min, k_max = int(params["k_min"]), int(params["k_max"])
        if not (1 <= k_min <= k_max) or params["sigma"] <= 0:
            raise ParameterError("cluster requires 1 <= k_min <= k_max and sigma > 0")
    elif spec.family == "grid":
        if params["jitter_scale"] < 0:
            raise ParameterError("grid requires jitter_scale >= 0")
    return params


def _reflect_unit(v: np.ndarray) -> np.ndarray:
    """Fold coordinates back into [0, 1] by reflecting at the borders."""
    v = np.abs(v) % 2.0
    return np.where(v > 1.0, 2.0 - v, v)


def _gen_rue(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    return rng.random((n, 2))


def _gen_explosion(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    pts = rng.random((n, 2))
    center = rng.random(2)
    radius, strength = params["radius"], params["strength"]
    delta = pts - center
    dist = np.hypot(delta[:, 0], delta[:, 1])
    hit = dist < radius
    count = int(hit.sum())
    if count:
        push = radius + rng.exponential(strength, count)
        d = dist[hit]
        # coincident point: probability-zero, push along +x
        unit = np.where(d[:, None] > 0, delta[hit] / np.maximum(d, 1e-300)[:, None], [1.0, 0.0])
        pts[hit] = center + unit * push[:, None]
    return _reflect_unit(pts)


def _gen_implosion(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    pts = rng.random((n, 2))
    center = rng.random(2)
    radius, pull = params["radius"], params["pull"]
    delta = pts - center
    dist = np.hypot(delta[:, 0], delta[:, 1])
    hit = dist < radius
    pts[hit] = center + pull * delta[hit]
    return pts


def _gen_expansion(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    pts = rng.random((n, 2))
    length, corridor, strength = params["seg_length"], params["corridor"], params["strength"]
    while True:  # segment must lie inside the square
        a = rng.random(2)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        direction = np.array([math.cos(theta), math.sin(theta)])
        b = a + length * direction
        if 0.0 <= b[0] <= 1.0 and 0.0 <= b[1] <= 1.0:
            break
    normal = np.array([-direction[1], direction[0]])
    rel = pts - a
    along = rel @ direction
    perp = rel @ normal
    hit = (along >= 0.0) & (along <= length) & (np.abs(perp) <= corridor)
    count = int(hit.sum())
    if count:
        shift = corridor + rng.exponential(strength, count)
        side = np.where(perp[hit] >= 0.0, 1.0, -1.0)
        pts[hit] = a + along[hit, None] * direction + (side * shift)[:, None] * normal
    return _reflect_unit(pts)


def _gen_cluster(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    k = int(rng.integers(int(params["k_min"]), int(params["k_max"]) + 1))
    sigma = params["sigma"]
    centers = rng.random((k, 2))
    assign = rng.integers(0, k, n)
    pts = centers[assign] + rng.normal(0.0, sigma, (n, 2))
    while True:
        bad = ~((pts >= 0.0) & (pts <= 1.0)).all(axis=1)
        if not bad.any():
            break
        pts[bad] = centers[assign[bad]] + rng.normal(0.0, sigma, (int(bad.sum()), 2))
    return pts


def _gen_grid(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    side = math.isqrt(n)
    if side * side < n:
        side += 1
    cells = rng.choice(side * side, size=n, replace=False)
    rows, cols = np.divmod(cells, side)
    centers = np.stack([(cols + 0.5) / side, (rows + 0.5) / side], axis=1)
    j = params["jitter_scale"] / side
    return centers + rng.uniform(-j, j, (n, 2))


_GENERATORS = {
    "rue": _gen_rue,
    "explosion": _gen_explosion,
    "implosion": _gen_implosion,
    "expansion": _gen_expansion,
    "cluster": _gen_cluster,
    "grid": _gen_grid,
}


def generate(spec: GenSpec) -> list[Instance]:
    """Produce ``spec.count`` instances, one independent RNG stream each.

    Stream i draws its size n ~ U[n_min, n_max] first, then runs the family
    process; nothing is shared between streams, so generation order (and any
    parallel split of the work) cannot change the result.
    """
    params = _check_spec(spec)
    out = []
    for i in range(spec.count):
        rng = child_rng(spec.seed, i)
        n = int(rng.integers(spec.n_min, spec.n_max + 1))
        pts = _GENERATORS[spec.family](rng, n, params)
        inst = Instance(
            id=f"{spec.family}-s{spec.seed}-{i:05d}",
            family=spec.family,
            seed=spec.seed,
            points=np.ascontiguousarray(pts, dtype=np.float64),
        )
        inst.validate()
        out.append(inst)
    return out


# --- TSPLIB subset ---------------------------------------------------------
#
# Headers NAME/COMMENT/TYPE/DIMENSION/EDGE_WEIGHT_TYPE, then NODE_COORD_SECTION
# with 1-based indices, then EOF.  Coordinates are written with 17 significant
# digits so every float64 round-trips bit-exactly.


def format_tsplib(instance: Instance) -> str:
    lines = [
        f"NAME : {instance.id}",
        f"COMMENT : family={instance.family} seed={instance.seed}",
        "TYPE : TSP",
        f"DIMENSION : {instance.n}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate(instance.points, start=1):
        lines.append(f"{i} {x:.17g} {y:.17g}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def write_tsplib(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(format_tsplib(instance), encoding="ascii")


_COMMENT_RE = re.compile(r"family=(\S+)\s+seed=(\d+)")


def parse_tsplib(text: str, source: str = "<string>") -> Instance:
    headers: dict[str, str] = {}
    name = None
    family, seed = "unknown", 0
    coords: np.ndarray | None = None
    seen = None
    dimension = None
    in_section = False
    filled = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if not in_section:
            if line == "NODE_COORD_SECTION":
                if dimension is None:
                    raise ParseError("NODE_COORD_SECTION before DIMENSION", lineno)
                coords = np.empty((dimension, 2), dtype=np.float64)
                seen = np.zeros(dimension, dtype=bool)
                in_section = True
                continue
            if ":" not in line:
                raise ParseError(f"expected 'KEY : VALUE', got {line!r}", lineno)
            key, _, value = line.partition(":")
            key, value = key.strip(), value.strip()
            headers[key] = value
            if key == "NAME":
                name = value
            elif key == "TYPE":
                if value != "TSP":
                    raise ParseError(f"unsupported TYPE {value!r}; only TSP", lineno)
            elif key == "DIMENSION":
                try:
                    dimension = int(value)
                except ValueError:
                    raise ParseError(f"DIMENSION must be an integer, got {value!r}", lineno)
                if dimension < 3:
                    raise ParseError(f"DIMENSION must be >= 3, got {dimension}", lineno)
            elif key == "EDGE_WEIGHT_TYPE":
                if value != "EUC_2D":
                    raise ParseError(
                        f"unsupported EDGE_WEIGHT_TYPE {value!r}; only EUC_2D", lineno
                    )
            elif key == "COMMENT":
                m = _COMMENT_RE.search(value)
                if m:
                    family = m.group(1)
                    seed = int(m.group(2))
        else:
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'index x y', got {line!r}", lineno)
            try:
                idx = int(parts[0])
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"bad node line {line!r}", lineno)
            if not (1 <= idx <= dimension):
                raise ParseError(f"node index {idx} outside 1..{dimension}", lineno)
            if seen[idx - 1]:
                raise ParseError(f"duplicate node index {idx}", lineno)
            seen[idx - 1] = True
            coords[idx - 1] = (x, y)
            filled += 1
    if "TYPE" not in headers:
        raise ParseError(f"{source}: missing TYPE header")
    if "EDGE_WEIGHT_TYPE" not in headers:
        raise ParseError(f"{source}: missing EDGE_WEIGHT_TYPE header")
    if dimension is None:
        raise ParseError(f"{source}: missing DIMENSION header")
    if not in_section:
        raise ParseError(f"{source}: missing NODE_COORD_SECTION")
    if filled != dimension:
        raise ParseError(f"{source}: {filled} node lines for DIMENSION {dimension}")
    inst = Instance(id=name or source, family=family, seed=seed, points=coords)
    inst.validate()
    return inst


def read_tsplib(path: str | Path) -> Instance:
    path = Path(path)
    return parse_tsplib(path.read_text(encoding="ascii"), source=path.stem)


def read_corpus(directory: str | Path) -> list[Instance]:
    """All *.tsp files in a directory, sorted by filename."""
    directory = Path(directory)
    files = sorted(directory.glob("*.tsp"))
    if not files:
        raise ParseError(f"no .tsp files in {directory}")
    return [read_tsplib(f) for f in files]
