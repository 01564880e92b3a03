import numpy as np
import pytest

from logicood.constraints import compile_source
from logicood.distributions import ScoreDistribution, survival
from logicood.errors import ValidationError
from logicood.fusion import FusedScorer, fuse_batch, fuse_score, threshold
from logicood.mln import MlnModel, mln_score_batch
from logicood.schema import Dataset, Schema

BIN2 = Schema((("p", ("false", "true")), ("q", ("false", "true"))))
GUMBEL = ScoreDistribution("gev", {"location": 0.0, "scale": 1.0, "shape": 0.0})
NONE = ScoreDistribution("none", {})


def make_model(weights=(2.0, 1.0)):
    cons = tuple(
        compile_source(s, BIN2, i) for i, s in enumerate(["p", "p -> q"])
    )
    return MlnModel(BIN2, cons, np.asarray(weights, dtype=np.float64))


def make_data(rng, n=200, with_scores=True):
    vectors = rng.integers(0, 2, size=(n, 2))
    return Dataset(
        BIN2,
        vectors.astype(np.int64),
        tuple(str(i) for i in range(n)),
        rng.normal(size=n) if with_scores else None,
        rng.random(n) < 0.5,
    )


def test_fuse_score_identity_factor():
    scorer = FusedScorer(make_model(), NONE)
    assert fuse_score(scorer, [1, 1], 123.0) == -3.0


def test_fuse_score_halving():
    # survival 0.5 at the Gumbel median ~0.3665
    import math

    median = -math.log(math.log(2))
    scorer = FusedScorer(make_model(), GUMBEL)
    fused = fuse_score(scorer, [1, 1], median)
    assert fused == pytest.approx(-1.5)


def test_fuse_score_non_finite_rejected():
    scorer = FusedScorer(make_model(), GUMBEL)
    with pytest.raises(ValidationError):
        fuse_score(scorer, [1, 1], float("nan"))


def test_fuse_batch_matches_scalar_bit_exact(rng):
    scorer = FusedScorer(make_model(), GUMBEL)
    data = make_data(rng, 500)
    fused = fuse_batch(scorer, data)
    for i in range(len(data)):
        assert fused[i] == fuse_score(scorer, data.vectors[i], data.detector_scores[i])


def test_fuse_batch_requires_detector_column(rng):
    scorer = FusedScorer(make_model(), GUMBEL)
    with pytest.raises(ValidationError, match="__detector_score"):
        fuse_batch(scorer, make_data(rng, 10, with_scores=False))


def test_fuse_single_row(rng):
    scorer = FusedScorer(make_model(), GUMBEL)
    data = make_data(rng, 1)
    assert fuse_batch(scorer, data).shape == (1,)


def test_fused_monotone_in_detector_score():
    # Same semantics, negative MLN score: a higher detector score cannot
    # decrease the fused score.
    scorer = FusedScorer(make_model(), GUMBEL)
    low = fuse_score(scorer, [1, 1], -1.0)
    high = fuse_score(scorer, [1, 1], 2.0)
    assert high >= low


def test_none_family_preserves_mln_ranking(rng):
    scorer = FusedScorer(make_model(), NONE)
    data = make_data(rng, 300)
    fused = fuse_batch(scorer, data)
    mln = mln_score_batch(scorer.model, data.vectors)
    assert np.array_equal(np.argsort(fused, kind="stable"), np.argsort(mln, kind="stable"))


def test_constant_negative_mln_tracks_detector_ranking(rng):
    # With no constraints satisfied-variation (constant MLN score -w), the
    # fused ranking is the reverse-survival, i.e. detector, ranking.
    cons = (compile_source("p or not p", BIN2),)
    model = MlnModel(BIN2, cons, np.array([3.0]))
    scorer = FusedScorer(model, GUMBEL)
    data = make_data(rng, 300)
    fused = fuse_batch(scorer, data)
    det = data.detector_scores
    order_fused = np.argsort(fused, kind="stable")
    order_det = np.argsort(det, kind="stable")
    assert np.array_equal(order_fused, order_det)


def test_threshold_boundary():
    assert threshold([-5.0, -1.0, 0.0], 0.0).tolist() == [False, False, True]


def test_threshold_extremes():
    scores = [-5.0, -1.0, 0.0]
    assert threshold(scores, -1e300).tolist() == [True, True, True]
    assert threshold(scores, 1.0).tolist() == [False, False, False]


def test_threshold_rejects_non_finite():
    with pytest.raises(ValidationError):
        threshold([float("inf")], 0.0)
