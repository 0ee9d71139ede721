"""Component fitting: kernels, the greedy search, and its invariants."""

import random

import numpy as np
import pytest

from treespace._util import derived_rng
from treespace.frechet import data_scale
from treespace.geodesic import distance, geodesic
from treespace.locus import ProjectorConfig, geometric_project
from treespace.pca import (EmptyDataError, InsufficientDataError, ProposalKernel,
                           default_kernels, fit_component, fit_principal_geodesic,
                           propose)
from treespace.simulate import SurfaceDatasetSpec, make_surface_dataset
from treespace.trees import PhyloTree

from conftest import random_resolved_tree, tree_from_xi


@pytest.fixture(scope="module")
def small_dataset():
    spec = SurfaceDatasetSpec(n_taxa=6, n_points=12, seed=2, op_count=2)
    W, Z, _ = make_surface_dataset(spec, compute_truth=False)
    return W, Z


class TestKernels:
    def test_validation(self):
        with pytest.raises(ValueError):
            ProposalKernel("resample")
        with pytest.raises(ValueError):
            ProposalKernel.beta_blend(0.0, 1.0)
        with pytest.raises(ValueError):
            ProposalKernel.random_walk(0, 0.1)

    def test_default_set(self):
        kernels = default_kernels(1.0)
        assert len(kernels) == 4
        assert {k.kind for k in kernels} == {"data_resample", "beta_blend",
                                             "random_walk"}

    def test_data_resample_single_tree(self):
        z = tree_from_xi(1, 1, 2)
        out = propose(ProposalKernel.data_resample(), tree_from_xi(-1, 1, 1),
                      [z], derived_rng(1))
        assert out is z

    def test_resample_requires_data(self):
        with pytest.raises(EmptyDataError):
            propose(ProposalKernel.data_resample(), tree_from_xi(1, 1, 1), [],
                    derived_rng(2))

    def test_beta_blend_at_same_tree_is_identity(self):
        x = tree_from_xi(1, 1, 2)
        out = propose(ProposalKernel.beta_blend(), x, [x], derived_rng(3))
        assert out is x

    def test_beta_blend_lands_on_geodesic(self):
        x, z = tree_from_xi(1, 1, 2), tree_from_xi(-2, 1, 1)
        out = propose(ProposalKernel.beta_blend(2, 2), x, [z], derived_rng(4))
        g = geodesic(x, z)
        assert distance(x, out) + distance(out, z) == pytest.approx(g.length, abs=1e-9)


class TestFit:
    def test_zero_dispersion_data_fits_tightly(self):
        spec = SurfaceDatasetSpec(n_taxa=6, n_points=10, seed=9, op_count=2)
        W, Z, _ = make_surface_dataset(spec, compute_truth=False)
        # replace data by exact surface points: dispersion zero
        from treespace.locus import SimplexPoint, surface_point
        rng = random.Random(5)
        exact = [surface_point(W, SimplexPoint(_dirichlet(rng)), eps=1e-4)
                 for _ in range(8)]
        component = fit_component(exact, 2, restarts=1, conv_window=4,
                                  conv_threshold=1e-2, seed=1, max_sweeps=10)
        d2_truth = sum(geometric_project(z, W, restarts=2, rng_seed=3).distance ** 2
                       for z in exact)
        assert component.stats.sum_sq_projected <= d2_truth + 1e-3

    def test_trace_monotone_and_deterministic(self, small_dataset):
        _, Z = small_dataset
        a = fit_component(Z, 2, restarts=1, conv_window=3, conv_threshold=1e-2,
                          seed=4, max_sweeps=6)
        b = fit_component(Z, 2, restarts=1, conv_window=3, conv_threshold=1e-2,
                          seed=4, max_sweeps=6)
        values = [d for _, d in a.trace]
        assert all(x >= y - 1e-12 for x, y in zip(values, values[1:]))
        assert a.stats.sum_sq_projected == b.stats.sum_sq_projected
        assert all(u.approx_equal(v) for u, v in zip(a.vertices, b.vertices))

    def test_vertices_lie_on_fitted_surface(self, small_dataset):
        _, Z = small_dataset
        component = fit_component(Z, 2, restarts=1, conv_window=2,
                                  conv_threshold=1e-2, seed=5, max_sweeps=4)
        eps = 1e-3 * data_scale(Z)
        for v in component.vertices:
            res = geometric_project(v, component.vertices, eps=eps, rng_seed=6)
            assert res.distance < 10 * eps

    def test_restart_dominance(self, small_dataset):
        _, Z = small_dataset
        one = fit_component(Z, 2, restarts=1, conv_window=2, conv_threshold=1e-2,
                            seed=7, max_sweeps=3)
        two = fit_component(Z, 2, restarts=2, conv_window=2, conv_threshold=1e-2,
                            seed=7, max_sweeps=3)
        search_best_one = one.trace[-1][1]
        assert min(d for _, d in two.trace) <= search_best_one + 1e-12

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            fit_component([tree_from_xi(1, 1, 1)], 2)


class TestPrincipalGeodesic:
    def test_two_trees_give_zero_residual(self):
        Z = [tree_from_xi(1, 1, 2), tree_from_xi(-2, 1, 1)]
        component = fit_principal_geodesic(Z, restarts=1, conv_window=2,
                                           conv_threshold=1e-2, seed=1,
                                           max_sweeps=4)
        # zero up to the projector's resolution (eps ~ 1e-3 of the data scale,
        # and endpoints stop a small multiple of eps short of the vertices)
        assert component.stats.sum_sq_projected < 1e-3
        assert component.stats.r_squared > 0.999

    def test_collinear_cloud_recovers_axis(self):
        # same-topology trees along a line: the fitted segment's direction
        # matches the top Euclidean principal axis
        rng = random.Random(31)
        base = random_resolved_tree(rng, 6, length_range=(0.8, 1.6))
        masks = sorted(base.internal_masks())
        direction = np.array([rng.uniform(-1, 1) for _ in masks])
        direction /= np.linalg.norm(direction)
        center = np.array([base.internal_masks()[m] for m in masks])
        Z = []
        for _ in range(12):
            t = rng.uniform(-0.5, 0.5)
            noise = np.array([rng.gauss(0, 0.01) for _ in masks])
            coords = center + t * direction + noise
            Z.append(PhyloTree.from_masks(base.leaves,
                                          dict(zip(masks, coords)), {}, 0.0))
        component = fit_principal_geodesic(Z, restarts=2, conv_window=5,
                                           conv_threshold=1e-3, seed=8,
                                           max_sweeps=20)
        v0, v1 = component.vertices
        seg = np.array([v1.internal_masks().get(m, 0.0) - v0.internal_masks().get(m, 0.0)
                        for m in masks])
        # only meaningful when the fitted segment stays in the orthant
        assert np.linalg.norm(seg) > 0
        cosine = abs(seg @ direction) / np.linalg.norm(seg)
        angle = np.degrees(np.arccos(min(1.0, cosine)))
        assert angle < 10.0

    def test_nested_orders_improve(self, small_dataset):
        _, Z = small_dataset
        k1 = fit_principal_geodesic(Z, restarts=1, conv_window=3,
                                    conv_threshold=1e-2, seed=9, max_sweeps=8)
        k2 = fit_component(Z, 2, restarts=1, conv_window=3, conv_threshold=1e-2,
                           seed=9, max_sweeps=8)
        assert k2.stats.sum_sq_projected <= k1.stats.sum_sq_projected + 5e-3


def _dirichlet(rng, alpha=(4.0, 4.0, 4.0)):
    draws = [rng.gammavariate(a, 1.0) for a in alpha]
    total = sum(draws)
    return tuple(d / total for d in draws)
