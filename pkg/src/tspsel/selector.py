"""Per-instance solver selection: dataset assembly, the two training losses,
the training loop, prediction, and a nearest-neighbor baseline over cheap
geometric features.

Two strategies share one network shape.  Classification trains against a
label distribution derived from the recorded times (one-hot at the fastest
solver, or a softmax-of-times soft label); regression predicts the times
themselves (log10 by default, since penalized failures dominate a raw-time
square loss).  Both weight instances by t^alpha, so examples where solvers
differ a lot matter more.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn, raster
from .errors import DomainError, ParameterError, ShapeError
from .instances import Instance
from .raster import AugmentConfig, RasterConfig
from .rng import rng_for

_LABEL_MODES = ("hard", "soft")
_TRANSFORMS = ("raw", "log10")
_STRATEGIES = ("classification", "regression")


@dataclass(frozen=True)
class LabeledExample:
    """One training row: the instance plus its measured solver times."""

    instance: Instance
    t: np.ndarray  # penalized median time per solver, strictly positive

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise DomainError(f"t must be a vector of >= 2 solver times, got shape {t.shape}")
        if not np.all(t > 0):
            raise DomainError("solver times must be strictly positive")
        object.__setattr__(self, "t", t)

    @property
    def best_solver(self) -> int:
        return int(np.argmin(self.t))


@dataclass(frozen=True)
class TrainConfig:
    strategy: str = "classification"
    epochs: int = 50
    batch: int = 64
    lr: float = 1e-4
    decay_rate: float = 0.9
    patience: int = 10
    alpha: float = 0.5
    label_mode: str = "hard"
    tau: float = 1.0
    target_transform: str = "log10"
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def validate(self) -> None:
        if self.strategy not in _STRATEGIES:
            raise ParameterError(f"strategy must be one of {_STRATEGIES}, got {self.strategy!r}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch < 1:
            raise ParameterError(f"batch must be >= 1, got {self.batch}")
        if self.lr <= 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.label_mode not in _LABEL_MODES:
            raise ParameterError(f"label_mode must be one of {_LABEL_MODES}, got {self.label_mode!r}")
        if self.target_transform not in _TRANSFORMS:
            raise ParameterError(f"target_transform must be one of {_TRANSFORMS}, got {self.target_transform!r}")
        self.augment.validate()


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 < self.train_fraction < 1.0):
            raise ParameterError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


# --- labels and losses -------------------------------------------------------


def make_label(t, mode: str = "hard", tau: float = 1.0) -> np.ndarray:
    """Empirical selection distribution for one time vector.

    hard: all mass on the fastest solver (ties to the lowest index).
    soft: p_j proportional to exp(-t_j / tau) -- cooler tau sharpens.
    """
    t = np.asarray(t, dtype=float)
    if mode == "hard":
        p = np.zeros(t.shape[-1])
        p[int(np.argmin(t))] = 1.0
        return p
    if mode == "soft":
        if tau <= 0:
            raise ParameterError(f"tau must be positive, got {tau}")
        z = -t / tau
        z -= z.max()
        e = np.exp(z)
        return e / e.sum()
    raise ParameterError(f"unknown label mode {mode!r}")


def loss_ce(logits, p, w):
    """Weighted cross-entropy against a label distribution.

    L = -sum_j w_j p_j log softmax(logits)_j, stabilized through the
    log-sum-exp identity so a confident wrong logit cannot produce log(0).
    Returns (loss, dL/dlogits).
    """
    logits = np.asarray(logits, dtype=float)
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    if logits.shape != p.shape or logits.shape != w.shape:
        raise ShapeError(f"shape mismatch: logits {logits.shape}, p {p.shape}, w {w.shape}")
    z = logits - logits.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logq = z - lse
    loss = float(-(w * p * logq).sum())
    s = np.exp(logq)
    grad = s * (w * p).sum(axis=-1, keepdims=True) - w * p
    return loss, grad


def transform_target(t, mode: str) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if mode == "raw":
        return t
    if mode == "log10":
        return np.log10(t)
    raise ParameterError(f"unknown target transform {mode!r}")


def loss_mse(q, target, w):
    """Weighted square loss; `target` is already transformed.

    L = sum_j w_j (q_j - target_j)^2, gradient 2 w (q - target).
    """
    q = np.asarray(q, dtype=float)
    target = np.asarray(target, dtype=float)
    w = np.asarray(w, dtype=float)
    if q.shape != target.shape or q.shape != w.shape:
        raise ShapeError(f"shape mismatch: q {q.shape}, target {target.shape}, w {w.shape}")
    diff = q - target
    return float((w * diff * diff).sum()), 2.0 * w * diff


# --- dataset plumbing --------------------------------------------------------


def split(examples: list[LabeledExample], spec: SplitSpec) -> tuple[list[LabeledExample], list[LabeledExample]]:
    """Stratified train/test partition keyed on each example's best solver.

    Within each stratum the examples are shuffled by a seed-derived stream
    and round(fraction * size) go to train, so the proportions of
    best-solver classes carry over.  A one-example stratum goes to train.
    """
    spec.validate()
    strata: dict[int, list[LabeledExample]] = {}
    for ex in sorted(examples, key=lambda e: e.instance.id):
        strata.setdefault(ex.best_solver, []).append(ex)
    train: list[LabeledExample] = []
    test: list[LabeledExample] = []
    for key in sorted(strata):
        group = strata[key]
        if len(group) == 1:
            warnings.warn(f"stratum {key} has a single example; keeping it in train")
            train.extend(group)
            continue
        order = rng_for(spec.seed, "split", key).permutation(len(group))
        takes = int(math.floor(spec.train_fraction * len(group) + 0.5))
        takes = min(max(takes, 1), len(group) - 1)  # both sides stay nonempty
        chosen = set(order[:takes].tolist())
        for idx, ex in enumerate(group):
            (train if idx in chosen else test).append(ex)
    return train, test


@dataclass
class SelectorModel:
    """Trained network plus everything needed to apply it to a raw instance."""

    config: nn.ModelConfig
    params: dict[str, np.ndarray]
    strategy: str
    target_transform: str
    raster_config: RasterConfig
    solver_ids: list[str]
    epoch_losses: list[float] = field(default_factory=list)


def _example_image(ex: LabeledExample, rc: RasterConfig, ac: AugmentConfig, rng) -> np.ndarray:
    return raster.to_input(raster.augment(ex.instance.points, rc, ac, rng))


def train(
    examples: list[LabeledExample],
    model_config: nn.ModelConfig,
    tc: TrainConfig,
    rc: RasterConfig | None = None,
    solver_ids: list[str] | None = None,
    on_epoch=None,
) -> SelectorModel:
    """Mini-batch Adam over the chosen loss with per-epoch augmentation.

    Every epoch reshuffles with its own derived stream and redraws each
    sample's augmentation from (seed, epoch, instance id), so the image a
    sample presents varies across epochs but never across reruns.  If the
    loss goes non-finite the loop stops and the parameters roll back to the
    last completed epoch.
    """
    tc.validate()
    model_config.validate()
    if not examples:
        raise DomainError("training set is empty")
    m = model_config.outputs
    for ex in examples:
        if ex.t.size != m:
            raise ShapeError(f"example {ex.instance.id} has {ex.t.size} times, model expects {m}")
    rc = rc or RasterConfig(c=model_config.input_side)
    if rc.side != model_config.input_side:
        raise ShapeError(f"raster side {rc.side} does not match model input {model_config.input_side}")
    params = nn.init_params(model_config, tc.seed)
    state = nn.AdamState(lr=tc.lr, decay_rate=tc.decay_rate, patience=tc.patience)
    state.validate()
    classification = tc.strategy == "classification"
    weights = [np.asarray(ex.t, dtype=float) ** tc.alpha for ex in examples]
    if classification:
        labels = [make_label(ex.t, tc.label_mode, tc.tau) for ex in examples]
    else:
        labels = [transform_target(ex.t, tc.target_transform) for ex in examples]
    losses: list[float] = []
    last_good = {k: v.copy() for k, v in params.items()}
    for epoch in range(tc.epochs):
        order = rng_for(tc.seed, "shuffle", epoch).permutation(len(examples))
        epoch_loss = 0.0
        aborted = False
        for start in range(0, len(order), tc.batch):
            idx = order[start : start + tc.batch]
            imgs = np.stack(
                [
                    _example_image(examples[i], rc, tc.augment, rng_for(tc.seed, "aug", epoch, examples[i].instance.id))
                    for i in idx
                ]
            )[:, None, :, :]
            p_batch = np.stack([labels[i] for i in idx])
            w_batch = np.stack([weights[i] for i in idx])
            logits, cache = nn.forward(params, model_config, imgs)
            if classification:
                loss, dlogits = loss_ce(logits, p_batch, w_batch)
            else:
                loss, dlogits = loss_mse(logits, p_batch, w_batch)
            loss /= len(idx)
            dlogits = dlogits / len(idx)
            if not math.isfinite(loss):
                aborted = True
                break
            grads = nn.backward(params, model_config, cache, dlogits)
            try:
                nn.adam_step(params, grads, state)
            except Exception:
                aborted = True
                break
            epoch_loss += loss * len(idx)
        if aborted:
            params = last_good
            break
        epoch_loss /= len(examples)
        losses.append(epoch_loss)
        nn.decay_on_plateau(state, losses)
        last_good = {k: v.copy() for k, v in params.items()}
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss, state.lr)
    return SelectorModel(
        config=model_config,
        params=params,
        strategy=tc.strategy,
        target_transform=tc.target_transform,
        raster_config=rc,
        solver_ids=list(solver_ids or [f"s{j}" for j in range(m)]),
        epoch_losses=losses,
    )


def selection_overhead(instance: Instance | np.ndarray, cost_rate: float = 1e6) -> float:
    """Virtual seconds charged for preparing the network's input: the
    normalize + rasterize + readout passes cost 4 operations per point."""
    pts = instance.points if isinstance(instance, Instance) else np.asarray(instance, dtype=float)
    return 4.0 * len(pts) / cost_rate


def predict_scores(model: SelectorModel, instance: Instance | np.ndarray) -> np.ndarray:
    """Raw network outputs for one instance, no augmentation."""
    pts = instance.points if isinstance(instance, Instance) else np.asarray(instance, dtype=float)
    image = raster.to_input(
        raster.augment(pts, model.raster_config, AugmentConfig(), rng_for(0))
    )
    x = image[None, None, :, :]
    logits, _ = nn.forward(model.params, model.config, x)
    return logits[0]


def select(model: SelectorModel, instance: Instance | np.ndarray) -> int:
    """Chosen solver index: argmax of class logits, or argmin of predicted
    times; ties resolve to the lowest index either way."""
    scores = predict_scores(model, instance)
    if model.strategy == "classification":
        return int(np.argmax(scores))
    return int(np.argmin(scores))


# --- cheap-feature baseline --------------------------------------------------

FEATURE_COUNT = 16
_SUBSAMPLE = 100
_OCC_GRID = 16


def _convex_hull_size(pts: np.ndarray) -> int:
    """Vertex count of the convex hull (monotone chain, collinear dropped)."""
    uniq = np.unique(pts, axis=0)
    if len(uniq) < 3:
        return len(uniq)
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    p = uniq[order]

    def half(points):
        chain = []
        for pt in points:
            while len(chain) >= 2:
                ox, oy = chain[-2]
                ax, ay = chain[-1]
                if (ax - ox) * (pt[1] - oy) - (ay - oy) * (pt[0] - ox) <= 0:
                    chain.pop()
                else:
                    break
            chain.append((pt[0], pt[1]))
        return chain

    lower = half(p)
    upper = half(p[::-1])
    return len(lower) + len(upper) - 2


def cheap_features(instance: Instance | np.ndarray, cost_rate: float = 1e6) -> tuple[np.ndarray, float]:
    """Sixteen summary statistics of the point geometry, plus the virtual
    seconds the extraction is charged (pairwise scans dominate: n^2 + s^2 +
    4n operations at the solver cost rate)."""
    pts = instance.points if isinstance(instance, Instance) else np.asarray(instance, dtype=float)
    n = len(pts)
    if n < 3:
        raise DomainError(f"need at least 3 points, got {n}")
    mins = pts.min(axis=0)
    maxs = pts.max(axis=0)
    spans = maxs - mins
    aspect = (min(spans) / max(spans)) if max(spans) > 0 else 1.0
    centroid = pts.mean(axis=0)
    center_off = float(np.hypot(*(centroid - (mins + maxs) / 2.0)))

    diff = pts[:, None, :] - pts[None, :, :]
    dmat = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dmat, np.inf)
    nnd = dmat.min(axis=1)

    s_idx = np.unique(np.linspace(0, n - 1, min(n, _SUBSAMPLE)).astype(int))
    sub = pts[s_idx]
    sd = np.hypot(*(sub[:, None, :] - sub[None, :, :]).transpose(2, 0, 1))
    iu = np.triu_indices(len(sub), k=1)
    pair = sd[iu]
    pair_mean = float(pair.mean())
    pair_std = float(pair.std())

    norm = raster.normalize(pts)
    occ = raster.rasterize(norm, _OCC_GRID)
    occupied = float((occ.pixels > 0).sum() / (_OCC_GRID * _OCC_GRID))
    peak = float(occ.pixels.max())

    feats = np.array(
        [
            float(n),
            float(aspect),
            center_off,
            float(nnd.mean()),
            float(nnd.std()),
            float(nnd.min()),
            float(nnd.max()),
            pair_mean,
            pair_std,
            _convex_hull_size(pts) / n,
            occupied,
            peak,
            pair_std / pair_mean if pair_mean > 0 else 0.0,
            float(pts[:, 0].std()),
            float(pts[:, 1].std()),
            float(np.hypot(*(pts - centroid).T).mean()),
        ]
    )
    ops = n * n + len(sub) ** 2 + 4 * n
    return feats, ops / cost_rate


class KnnBaseline:
    """k-nearest-neighbor time prediction in z-scored feature space."""

    def __init__(self, examples: list[LabeledExample], k: int, cost_rate: float = 1e6):
        if not examples:
            raise DomainError("baseline needs a nonempty training set")
        if k < 1 or k > len(examples):
            raise ParameterError(f"k must lie in [1, {len(examples)}], got {k}")
        self.k = k
        feats = []
        for ex in examples:
            f, _ = cheap_features(ex.instance, cost_rate)
            feats.append(f)
        self.features = np.stack(feats)
        self.times = np.stack([ex.t for ex in examples])
        self.mean = self.features.mean(axis=0)
        std = self.features.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Mean time vector of the k nearest training examples."""
        z = (self.features - self.mean) / self.std
        q = (np.asarray(features, dtype=float) - self.mean) / self.std
        d = np.sqrt(((z - q) ** 2).sum(axis=1))
        order = np.argsort(d, kind="stable")[: self.k]
        return self.times[order].mean(axis=0)

    def select(self, instance: Instance | np.ndarray, cost_rate: float = 1e6) -> tuple[int, float]:
        """(chosen solver index, selection overhead in virtual seconds)."""
        f, t_feat = cheap_features(instance, cost_rate)
        pred = self.predict(f)
        return int(np.argmin(pred)), t_feat
