"""Frechet means: objective, both algorithms, and their invariants."""

import random
from math import sqrt

import pytest

from treespace.frechet import (EmptySampleError, WeightedSample, cyclic_mean,
                               data_scale, frechet_objective, sturm_mean)
from treespace.geodesic import distance
from treespace.trees import LeafSet, PhyloTree

from conftest import LEAVES6, random_resolved_tree, split6, tree_from_xi

STICKY_MEAN = tree_from_xi(0, 0, 4.0 / 3.0)


@pytest.fixture(scope="module")
def anchors():
    return (tree_from_xi(1, 1, 2), tree_from_xi(-2, 1, 1), tree_from_xi(1, -2, 1))


def same_orthant_sample(rng, n_trees=3):
    base = random_resolved_tree(rng, 6)
    masks = sorted(base.internal_masks())
    trees = [PhyloTree.from_masks(base.leaves,
                                  {m: rng.uniform(0.2, 2.0) for m in masks}, {}, 0.0)
             for _ in range(n_trees)]
    weights = [rng.uniform(0.2, 1.0) for _ in range(n_trees)]
    return trees, weights, masks


def euclidean_mean(trees, weights, masks):
    total = sum(weights)
    return {m: sum(w * t.internal_masks()[m] for t, w in zip(trees, weights)) / total
            for m in masks}


class TestWeightedSample:
    def test_normalization(self):
        sample = WeightedSample([tree_from_xi(1, 1, 2)] * 3, [2.0, 4.0, 2.0])
        assert sum(sample.weights) == pytest.approx(1.0)
        assert sample.weights[1] == pytest.approx(0.5)

    def test_empty_rejected(self):
        with pytest.raises(EmptySampleError):
            WeightedSample([])

    def test_all_zero_weights_rejected(self):
        with pytest.raises(ValueError):
            WeightedSample([tree_from_xi(1, 1, 2)], [0.0])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            WeightedSample([tree_from_xi(1, 1, 2)] * 2, [0.5, -0.5])


class TestObjective:
    def test_zero_at_single_point(self):
        z = tree_from_xi(1, 1, 2)
        assert frechet_objective(z, WeightedSample([z])) == 0.0

    def test_closed_form_at_cone_point(self, anchors):
        # distances from (0,0,1) to the anchors have closed forms
        y = tree_from_xi(0, 0, 1)
        sample = WeightedSample(anchors)
        expected = (
            (1 + 1 + 1) +                # to (1,1,2)
            (4 + 1 + 0) +                # to (-2,1,1)
            (1 + 4 + 0)                  # to (1,-2,1)
        ) / 3.0
        assert frechet_objective(y, sample) == pytest.approx(expected, abs=1e-12)

    def test_weight_scaling_invariance(self, anchors):
        y = tree_from_xi(0.2, 0.1, 1.0)
        once = frechet_objective(y, WeightedSample(anchors, [1, 2, 3]))
        doubled = frechet_objective(y, WeightedSample(anchors, [2, 4, 6]))
        assert once == pytest.approx(doubled, abs=1e-12)


class TestMeans:
    def test_single_tree(self):
        z = tree_from_xi(1, 1, 2)
        for result in (sturm_mean(WeightedSample([z])), cyclic_mean(WeightedSample([z]))):
            assert result.mean is z
            assert result.converged

    def test_cyclic_sticky_fixture(self, anchors):
        result = cyclic_mean(WeightedSample(anchors), eps=1e-4)
        assert result.converged
        assert distance(result.mean, STICKY_MEAN) < 1e-4

    def test_sturm_sticky_fixture(self, anchors):
        # stochastic algorithm: noise after m draws scales as 0.47/sqrt(m),
        # so assert a statistically safe tolerance at this budget
        result = sturm_mean(WeightedSample(anchors), rng_seed=0, eps=5e-5,
                            max_iter=200_000)
        assert distance(result.mean, STICKY_MEAN) < 3.5e-3

    def test_same_orthant_oracle(self):
        rng = random.Random(21)
        trees, weights, masks = same_orthant_sample(rng)
        expected = euclidean_mean(trees, weights, masks)
        result = cyclic_mean(WeightedSample(trees, weights), eps=2e-5)
        got = result.mean.internal_masks()
        for m in masks:
            assert got[m] == pytest.approx(expected[m], abs=2e-4)
        sturm = sturm_mean(WeightedSample(trees, weights), rng_seed=3, eps=1e-4,
                           max_iter=150_000)
        for m in masks:
            assert sturm.mean.internal_masks()[m] == pytest.approx(expected[m], abs=2e-2)

    def test_unit_weight_returns_that_tree(self, anchors):
        sample = WeightedSample(anchors, [0.0, 1.0, 0.0])
        assert cyclic_mean(sample).mean is anchors[1]
        assert sturm_mean(sample).mean is anchors[1]

    def test_permutation_invariance_cyclic(self):
        rng = random.Random(22)
        trees, weights, masks = same_orthant_sample(rng, 4)
        eps = 5e-5
        a = cyclic_mean(WeightedSample(trees, weights), eps=eps)
        order = [2, 0, 3, 1]
        b = cyclic_mean(WeightedSample([trees[i] for i in order],
                                       [weights[i] for i in order]), eps=eps)
        assert distance(a.mean, b.mean) <= 2 * eps

    def test_objective_dominates_sample_points(self, anchors):
        sample = WeightedSample(anchors)
        result = cyclic_mean(sample, eps=1e-5)
        for z in anchors:
            assert result.objective <= frechet_objective(z, sample) + 1e-8

    def test_three_spider_stickiness(self):
        # three unit-length splits, pairwise incompatible: the mean sticks
        # to the star tree by symmetry
        leaves = LeafSet.numbered(3)
        arms = [leaves.split_of([1, 2]), leaves.split_of([1, 3]), leaves.split_of([2, 3])]
        trees = [PhyloTree(leaves, {s: 1.0}) for s in arms]
        result = cyclic_mean(WeightedSample(trees), eps=1e-4)
        star = PhyloTree(leaves, {})
        assert distance(result.mean, star) < 5e-3

    def test_cross_algorithm_agreement(self):
        rng = random.Random(23)
        from conftest import random_tree
        for trial in range(4):
            trees = [random_tree(rng, 5) for _ in range(4)]
            eps = 2e-3 * data_scale(trees)
            a = cyclic_mean(WeightedSample(trees), eps=eps)
            b = sturm_mean(WeightedSample(trees), rng_seed=trial, eps=eps)
            assert distance(a.mean, b.mean) < 25 * eps

    def test_nonconvergence_reported_not_raised(self, anchors):
        result = cyclic_mean(WeightedSample(anchors), eps=1e-9, max_iter=200)
        assert not result.converged
        assert result.iterations == 200
