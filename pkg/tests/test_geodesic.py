"""Geodesics: supports, distances, interpolation, and metric-space laws."""

import random
from math import sqrt

import pytest

from treespace.geodesic import (ParameterOutOfRangeError, compute_support,
                                distance, geodesic, interpolate, is_simple,
                                point_on_geodesic, support_signature)
from treespace.trees import LeafSetMismatchError, NotFullyResolvedError, PhyloTree

from conftest import (LEAVES6, random_resolved_tree, random_tree, split6,
                      tree_from_xi, xi_of)
from oracles import brute_force_distance


@pytest.fixture(scope="module")
def anchors():
    return (tree_from_xi(1, 1, 2), tree_from_xi(-2, 1, 1), tree_from_xi(1, -2, 1))


class TestReferenceGeometry:
    def test_pairwise_distances(self, anchors):
        v0, v1, v2 = anchors
        assert distance(v0, v1) == pytest.approx(sqrt(10), abs=1e-12)
        assert distance(v0, v2) == pytest.approx(sqrt(10), abs=1e-12)
        assert distance(v1, v2) == pytest.approx(2 * sqrt(5), abs=1e-12)

    def test_cone_support_between_far_anchors(self, anchors):
        _, v1, v2 = anchors
        support = compute_support(v1, v2)
        assert support.n_legs == 1
        assert {str(s) for s in support.a_sets[0]} == {"{3,4,5}", "{4,5}"}
        assert {str(s) for s in support.b_sets[0]} == {"{2,3}", "{2,3,4}"}
        assert [str(s) for s in support.common_splits] == ["{2,3,4,5}"]

    def test_simple_support_between_near_anchors(self, anchors):
        v0, v1, _ = anchors
        support = compute_support(v0, v1)
        assert support.n_legs == 1
        assert {str(s) for s in support.a_sets[0]} == {"{2,3}"}
        assert {str(s) for s in support.b_sets[0]} == {"{3,4,5}"}
        assert {str(s) for s in support.common_splits} == {"{4,5}", "{2,3,4,5}"}

    def test_support_of_identical_trees(self, anchors):
        v0 = anchors[0]
        support = compute_support(v0, v0)
        assert support.n_legs == 0
        assert len(support.common_splits) == v0.n_internal

    def test_kinked_midpoint_is_cone_point(self, anchors):
        _, v1, v2 = anchors
        mid = point_on_geodesic(geodesic(v1, v2), 0.5)
        assert xi_of(mid) == pytest.approx((0.0, 0.0, 1.0), abs=1e-12)

    def test_interpolation_on_straight_segment(self, anchors):
        v0, v1, _ = anchors
        point = point_on_geodesic(geodesic(v0, v1), 1.0 / 3.0)
        assert xi_of(point) == pytest.approx((0.0, 1.0, 5.0 / 3.0), abs=1e-12)

    def test_endpoints_exact(self, anchors):
        v0, v1, _ = anchors
        g = geodesic(v0, v1)
        assert point_on_geodesic(g, 0.0) is v0
        assert point_on_geodesic(g, 1.0) is v1

    def test_simplicity(self, anchors):
        v0, v1, v2 = anchors
        assert is_simple(geodesic(v0, v1))
        assert not is_simple(geodesic(v1, v2))

    def test_simplicity_requires_resolved(self, anchors):
        v0 = anchors[0]
        unresolved = tree_from_xi(0, 0, 1)
        with pytest.raises(NotFullyResolvedError):
            is_simple(geodesic(v0, unresolved))

    def test_same_orthant_is_simple_vacuously(self, anchors):
        v0 = anchors[0]
        other = tree_from_xi(0.3, 2.0, 0.7)
        g = geodesic(v0, other)
        assert g.support.n_legs == 0
        assert is_simple(g)


class TestSupportRegions:
    def test_five_mutual_support_regions(self, anchors):
        v0, v1, v2 = anchors
        tokens = set()
        grid = [i / 7.0 + 0.013 for i in range(-14, 14)]
        for a in grid:
            for b in grid:
                if a < 0 and b < 0:
                    continue
                if abs(2 * a + b) < 1e-6 or abs(a + 2 * b) < 1e-6:
                    continue
                x = tree_from_xi(a, b, 1.0)
                tokens.add((support_signature(x, v0), support_signature(x, v1),
                            support_signature(x, v2)))
        assert len(tokens) == 5

    def test_signature_distinguishes_supports(self, anchors):
        v0, v1, _ = anchors
        inside = tree_from_xi(0.5, 0.5, 1.0)
        other_side = tree_from_xi(-0.5, 0.5, 1.0)
        assert support_signature(inside, v0) != support_signature(other_side, v0)
        assert support_signature(inside, v1) == support_signature(
            tree_from_xi(0.9, 0.2, 0.4), v1)

    def test_degenerate_signature_differs(self, anchors):
        v0 = anchors[0]
        assert support_signature(v0, v0) != support_signature(
            tree_from_xi(-0.1, 1, 2), v0)


class TestBruteForceOracle:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_enumeration(self, seed):
        rng = random.Random(1000 + seed)
        for _ in range(25):
            n = rng.choice([3, 4, 5])
            x = random_tree(rng, n)
            y = random_tree(rng, n)
            assert distance(x, y) == pytest.approx(
                brute_force_distance(x, y), abs=1e-8)


class TestMetricLaws:
    def test_symmetry_and_swapped_support(self):
        rng = random.Random(7)
        for _ in range(40):
            x, y = random_tree(rng, 6), random_tree(rng, 6)
            assert distance(x, y) == pytest.approx(distance(y, x), abs=1e-10)
            fwd = compute_support(x, y)
            back = compute_support(y, x)
            assert fwd.a_sets == tuple(reversed(back.b_sets))
            assert fwd.b_sets == tuple(reversed(back.a_sets))

    def test_triangle_inequality(self):
        rng = random.Random(8)
        for _ in range(150):
            x, y, z = (random_tree(rng, 6) for _ in range(3))
            assert distance(x, z) <= distance(x, y) + distance(y, z) + 1e-9

    def test_midpoint_comparison(self):
        # the CAT(0) inequality against the midpoint, the testable form of
        # nonpositive curvature
        rng = random.Random(9)
        for _ in range(120):
            x, y, z = (random_tree(rng, 6) for _ in range(3))
            mid = point_on_geodesic(geodesic(x, y), 0.5)
            lhs = distance(z, mid) ** 2
            rhs = 0.5 * distance(z, x) ** 2 + 0.5 * distance(z, y) ** 2 \
                - 0.25 * distance(x, y) ** 2
            assert lhs <= rhs + 1e-9

    def test_same_orthant_reduces_to_euclidean(self):
        rng = random.Random(10)
        for _ in range(30):
            base = random_resolved_tree(rng, 7)
            masks = sorted(base.internal_masks())
            a = {m: rng.uniform(0.1, 2.0) for m in masks}
            b = {m: rng.uniform(0.1, 2.0) for m in masks}
            x = PhyloTree.from_masks(base.leaves, a, {}, 0.0)
            y = PhyloTree.from_masks(base.leaves, b, {}, 0.0)
            euclid = sqrt(sum((a[m] - b[m]) ** 2 for m in masks))
            assert distance(x, y) == pytest.approx(euclid, abs=1e-12)

    def test_cone_path_upper_bound(self):
        rng = random.Random(11)
        for _ in range(60):
            x, y = random_tree(rng, 6), random_tree(rng, 6)
            support = compute_support(x, y)
            a_all = sqrt(sum(l * l for leg in support.legs for _, l in leg[0]))
            b_all = sqrt(sum(l * l for leg in support.legs for _, l in leg[1]))
            common = sum((lx - ly) ** 2 for _, lx, ly in support.common)
            bound = sqrt((a_all + b_all) ** 2 + common)
            assert distance(x, y) <= bound + 1e-12

    def test_constant_speed_parameterization(self):
        rng = random.Random(12)
        for _ in range(15):
            x, y = random_tree(rng, 6, p_unresolved=0.1), random_tree(rng, 6, p_unresolved=0.1)
            g = geodesic(x, y)
            s, t = sorted((rng.random(), rng.random()))
            ps, pt = point_on_geodesic(g, s), point_on_geodesic(g, t)
            assert distance(ps, pt) == pytest.approx((t - s) * g.length, abs=1e-9)

    def test_leafset_mismatch_raises(self):
        x = random_tree(random.Random(1), 5)
        y = random_tree(random.Random(2), 6)
        with pytest.raises(LeafSetMismatchError):
            distance(x, y)

    def test_parameter_out_of_range(self, anchors=None):
        x = tree_from_xi(1, 1, 2)
        y = tree_from_xi(-2, 1, 1)
        g = geodesic(x, y)
        with pytest.raises(ParameterOutOfRangeError):
            point_on_geodesic(g, 1.5)

    def test_support_invariants_on_random_pairs(self):
        rng = random.Random(13)
        for _ in range(60):
            n = rng.choice([5, 6, 8])
            x, y = random_tree(rng, n), random_tree(rng, n)
            compute_support(x, y).validate()


class TestPendantModes:
    def test_pendants_enter_through_common_part(self):
        x = tree_from_xi(1, 1, 2, pendants=True)
        y = tree_from_xi(-2, 1, 1)  # no pendants: they count as zero
        d_ignore = distance(x, y, "ignore")
        d_include = distance(x, y, "include")
        assert d_include == pytest.approx(sqrt(d_ignore ** 2 + 5.0), abs=1e-12)

    def test_interpolation_carries_pendants(self):
        x = tree_from_xi(1, 1, 2, pendants=True)
        y = tree_from_xi(1, 1, 1, pendants=True)
        mid = interpolate(x, y, 0.5)
        assert mid.pendant_masks()[0b10] == pytest.approx(1.0)
