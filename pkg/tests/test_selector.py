"""Labels, losses, data plumbing, training loop, and the feature baseline."""
import warnings

import numpy as np
import pytest

from tspsel import nn, selector
from tspsel.errors import DomainError, ParameterError, ShapeError
from tspsel.instances import GenSpec, Instance, generate
from tspsel.raster import AugmentConfig, RasterConfig
from tspsel.rng import child_rng


def make_example(points, t, iid="x", family="rue"):
    return selector.LabeledExample(
        instance=Instance(id=iid, family=family, seed=0, points=np.asarray(points, dtype=float)),
        t=np.asarray(t, dtype=float),
    )


def toy_corpus(count, seed, family="rue"):
    return generate(GenSpec(family, count, 12, 20, seed=seed))


# --- labels -----------------------------------------------------------------


def test_labeled_example_validation():
    pts = child_rng(0).random((5, 2))
    with pytest.raises(DomainError):
        make_example(pts, [1.0])
    with pytest.raises(DomainError):
        make_example(pts, [1.0, 0.0])
    ex = make_example(pts, [3.0, 1.0, 2.0])
    assert ex.best_solver == 1


def test_make_label_hard_breaks_ties_low():
    np.testing.assert_array_equal(selector.make_label([2.0, 1.0, 1.0]), [0, 1, 0])


def test_make_label_soft():
    p = selector.make_label([1.0, 2.0], mode="soft", tau=1.0)
    assert p[0] > p[1] > 0
    np.testing.assert_allclose(p.sum(), 1.0)
    np.testing.assert_allclose(p[0] / p[1], np.e)  # exp(-1) - exp(-2) gap
    sharper = selector.make_label([1.0, 2.0], mode="soft", tau=0.1)
    assert sharper[0] > p[0]
    with pytest.raises(ParameterError):
        selector.make_label([1.0, 2.0], mode="soft", tau=0.0)
    with pytest.raises(ParameterError):
        selector.make_label([1.0, 2.0], mode="fuzzy")


# --- losses ------------------------------------------------------------------


def test_loss_ce_matches_manual():
    logits = np.array([[0.3, -0.7, 1.1]])
    p = np.array([[0.2, 0.5, 0.3]])
    w = np.array([[1.0, 2.0, 0.5]])
    loss, _ = selector.loss_ce(logits, p, w)
    q = np.exp(logits) / np.exp(logits).sum()
    assert loss == pytest.approx(float(-(w * p * np.log(q)).sum()), rel=1e-12)


def test_loss_ce_gradient_finite_differences():
    rng = child_rng(21)
    logits = rng.normal(size=(4, 3))
    p = rng.random((4, 3))
    p /= p.sum(axis=1, keepdims=True)
    w = rng.random((4, 3)) + 0.5
    _, grad = selector.loss_ce(logits, p, w)
    eps = 1e-7
    flat = logits.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi, _ = selector.loss_ce(logits, p, w)
        flat[i] = keep - eps
        lo, _ = selector.loss_ce(logits, p, w)
        flat[i] = keep
        assert abs(grad.ravel()[i] - (hi - lo) / (2 * eps)) < 1e-6


def test_loss_ce_survives_huge_logits():
    loss, grad = selector.loss_ce(
        np.array([[1e4, -1e4]]), np.array([[0.0, 1.0]]), np.ones((1, 2))
    )
    assert np.isfinite(loss) and np.all(np.isfinite(grad))


def test_loss_ce_shape_mismatch():
    with pytest.raises(ShapeError):
        selector.loss_ce(np.zeros((1, 3)), np.zeros((1, 2)), np.zeros((1, 3)))


def test_loss_mse_value_and_gradient():
    q = np.array([[1.0, 2.0]])
    target = np.array([[0.0, 4.0]])
    w = np.array([[1.0, 0.5]])
    loss, grad = selector.loss_mse(q, target, w)
    assert loss == pytest.approx(1.0 + 0.5 * 4.0)
    np.testing.assert_allclose(grad, [[2.0, -2.0]])


def test_transform_target():
    np.testing.assert_allclose(selector.transform_target([10.0, 1.0], "log10"), [1.0, 0.0])
    np.testing.assert_array_equal(selector.transform_target([3.0], "raw"), [3.0])
    with pytest.raises(ParameterError):
        selector.transform_target([1.0], "sqrt")


# --- split ---------------------------------------------------------------------


def test_split_stratified_proportions():
    insts = toy_corpus(40, seed=31)
    examples = [
        selector.LabeledExample(instance=ist, t=[1.0, 2.0] if i < 20 else [2.0, 1.0])
        for i, ist in enumerate(insts)
    ]
    train, test = selector.split(examples, selector.SplitSpec(0.7, seed=0))
    assert len(train) == 28 and len(test) == 12
    for side, count in ((train, 14), (test, 6)):
        assert sum(1 for e in side if e.best_solver == 0) == count
    # partition: no overlap, nothing lost
    ids = sorted(e.instance.id for e in train + test)
    assert ids == sorted(e.instance.id for e in examples)


def test_split_deterministic_and_seed_sensitive():
    insts = toy_corpus(20, seed=32)
    examples = [selector.LabeledExample(instance=i, t=[1.0, 2.0]) for i in insts]
    a1 = {e.instance.id for e in selector.split(examples, selector.SplitSpec(0.5, 1))[0]}
    a2 = {e.instance.id for e in selector.split(examples, selector.SplitSpec(0.5, 1))[0]}
    b = {e.instance.id for e in selector.split(examples, selector.SplitSpec(0.5, 2))[0]}
    assert a1 == a2
    assert a1 != b


def test_split_singleton_stratum_goes_to_train():
    insts = toy_corpus(5, seed=33)
    examples = [
        selector.LabeledExample(instance=ist, t=[1.0, 2.0] if i else [2.0, 1.0])
        for i, ist in enumerate(insts)
    ]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        train, test = selector.split(examples, selector.SplitSpec(0.5, 0))
    assert any("single example" in str(w.message) for w in caught)
    assert examples[0].instance.id in {e.instance.id for e in train}
    assert len(train) + len(test) == 5


def test_split_keeps_both_sides_nonempty():
    insts = toy_corpus(4, seed=34)
    examples = [selector.LabeledExample(instance=i, t=[1.0, 2.0]) for i in insts]
    for frac in (0.01, 0.99):
        train, test = selector.split(examples, selector.SplitSpec(frac, 0))
        assert train and test
    with pytest.raises(ParameterError):
        selector.split(examples, selector.SplitSpec(1.0, 0))


# --- training loop ---------------------------------------------------------------


TINY_MODEL = nn.ModelConfig(input_side=8, stage_channels=(2, 2, 3), blocks_per_stage=1, outputs=2)


def tiny_examples():
    # two visually distinct families so even a toy net can tell them apart
    a = toy_corpus(4, seed=35, family="rue")
    b = toy_corpus(4, seed=36, family="cluster")
    return [selector.LabeledExample(instance=i, t=[1.0, 10.0]) for i in a] + [
        selector.LabeledExample(instance=i, t=[10.0, 1.0]) for i in b
    ]


def test_train_smoke_classification():
    examples = tiny_examples()
    tc = selector.TrainConfig(epochs=3, batch=4, lr=1e-3, seed=0)
    model = selector.train(examples, TINY_MODEL, tc, rc=RasterConfig(c=8), solver_ids=["a", "b"])
    assert len(model.epoch_losses) == 3
    assert model.solver_ids == ["a", "b"]
    assert model.strategy == "classification"
    # something was learned: parameters moved off the zero head
    assert np.abs(model.params["head.w"]).sum() > 0
    choice = selector.select(model, examples[0].instance)
    assert choice in (0, 1)


def test_train_deterministic():
    examples = tiny_examples()
    tc = selector.TrainConfig(epochs=2, batch=4, lr=1e-3, seed=3)
    m1 = selector.train(examples, TINY_MODEL, tc, rc=RasterConfig(c=8))
    m2 = selector.train(examples, TINY_MODEL, tc, rc=RasterConfig(c=8))
    for k in m1.params:
        np.testing.assert_array_equal(m1.params[k], m2.params[k])
    assert m1.epoch_losses == m2.epoch_losses


def test_train_regression_strategy():
    examples = tiny_examples()
    tc = selector.TrainConfig(strategy="regression", epochs=2, batch=4, lr=1e-3, seed=1)
    model = selector.train(examples, TINY_MODEL, tc, rc=RasterConfig(c=8))
    scores = selector.predict_scores(model, examples[0].instance)
    assert scores.shape == (2,)
    assert selector.select(model, examples[0].instance) == int(np.argmin(scores))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
def test_train_rolls_back_on_blowup():
    examples = tiny_examples()
    tc = selector.TrainConfig(strategy="regression", epochs=6, batch=8, lr=1e60, seed=2)
    model = selector.train(examples, TINY_MODEL, tc, rc=RasterConfig(c=8))
    # the divergent epoch is discarded: whatever survived is finite
    for v in model.params.values():
        assert np.all(np.isfinite(v))
    assert len(model.epoch_losses) < 6


def test_train_input_validation():
    examples = tiny_examples()
    with pytest.raises(DomainError):
        selector.train([], TINY_MODEL, selector.TrainConfig())
    with pytest.raises(ShapeError):
        selector.train(examples, TINY_MODEL, selector.TrainConfig(), rc=RasterConfig(c=16))
    three = [
        selector.LabeledExample(instance=examples[0].instance, t=[1.0, 2.0, 3.0])
    ]
    with pytest.raises(ShapeError):
        selector.train(three, TINY_MODEL, selector.TrainConfig(epochs=1), rc=RasterConfig(c=8))
    with pytest.raises(ParameterError):
        selector.TrainConfig(strategy="quantum").validate()
    with pytest.raises(ParameterError):
        selector.TrainConfig(epochs=0).validate()


def test_predict_scores_ignores_augment_randomness():
    examples = tiny_examples()
    tc = selector.TrainConfig(
        epochs=1, batch=4, lr=1e-3, seed=0, augment=AugmentConfig(d=4, flip=True)
    )
    model = selector.train(examples, TINY_MODEL, tc, rc=RasterConfig(c=8))
    s1 = selector.predict_scores(model, examples[0].instance)
    s2 = selector.predict_scores(model, examples[0].instance)
    np.testing.assert_array_equal(s1, s2)


# --- overhead and features ---------------------------------------------------------


def test_selection_overhead_formula():
    pts = child_rng(40).random((250, 2))
    assert selector.selection_overhead(pts) == pytest.approx(1000.0 / 1e6)
    assert selector.selection_overhead(pts, cost_rate=1e3) == pytest.approx(1.0)


def test_cheap_features_shape_and_time():
    insts = toy_corpus(1, seed=41)
    f, t = selector.cheap_features(insts[0])
    n = insts[0].n
    assert f.shape == (selector.FEATURE_COUNT,)
    assert np.all(np.isfinite(f))
    assert f[0] == n
    assert t == pytest.approx((n * n + n * n + 4 * n) / 1e6)  # n < 100: no subsample


def test_cheap_features_subsample_caps_cost():
    pts = child_rng(42).random((300, 2))
    _, t = selector.cheap_features(pts)
    assert t == pytest.approx((300**2 + 100**2 + 4 * 300) / 1e6)


def test_cheap_features_deterministic():
    pts = child_rng(43).random((80, 2))
    f1, _ = selector.cheap_features(pts)
    f2, _ = selector.cheap_features(pts)
    np.testing.assert_array_equal(f1, f2)


def test_cheap_features_needs_three_points():
    with pytest.raises(DomainError):
        selector.cheap_features(np.array([[0.0, 0.0], [1.0, 1.0]]))


def test_convex_hull_size_known_shapes():
    square_plus_center = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
    assert selector._convex_hull_size(square_plus_center) == 4
    collinear = np.array([[0, 0], [1, 1], [2, 2]], dtype=float)
    assert selector._convex_hull_size(collinear) == 2
    triangle = np.array([[0, 0], [4, 0], [2, 3]], dtype=float)
    assert selector._convex_hull_size(triangle) == 3


# --- knn baseline -------------------------------------------------------------------


def test_knn_baseline_separable():
    rue = toy_corpus(8, seed=44, family="rue")
    grid = generate(GenSpec("grid", 8, 100, 144, seed=45))
    train = [selector.LabeledExample(instance=i, t=[1.0, 5.0]) for i in rue[:6]] + [
        selector.LabeledExample(instance=i, t=[5.0, 1.0]) for i in grid[:6]
    ]
    knn = selector.KnnBaseline(train, k=3)
    for inst, want in ((rue[6], 0), (rue[7], 0), (grid[6], 1), (grid[7], 1)):
        got, overhead = knn.select(inst)
        assert got == want
        assert overhead > 0


def test_knn_baseline_predicts_neighbor_mean():
    # identical features => prediction is the plain mean of the k times
    pts = child_rng(46).random((10, 2))
    train = [
        make_example(pts, [1.0, 4.0], iid="a"),
        make_example(pts, [3.0, 2.0], iid="b"),
    ]
    knn = selector.KnnBaseline(train, k=2)
    f, _ = selector.cheap_features(pts)
    np.testing.assert_allclose(knn.predict(f), [2.0, 3.0])


def test_knn_baseline_validation():
    pts = child_rng(47).random((10, 2))
    ex = make_example(pts, [1.0, 2.0])
    with pytest.raises(DomainError):
        selector.KnnBaseline([], k=1)
    with pytest.raises(ParameterError):
        selector.KnnBaseline([ex], k=2)
    with pytest.raises(ParameterError):
        selector.KnnBaseline([ex], k=0)
