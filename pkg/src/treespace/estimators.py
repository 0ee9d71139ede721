"""Scikit-learn style estimators over samples of trees.

The estimators take ``X`` as a sequence of ``PhyloTree`` over a common
taxon set (the analogue of a feature matrix) and follow the fit/transform
protocol with ``get_params``/``set_params``, so they compose with
scikit-learn tooling such as ``clone`` and pipelines whose later stages
consume the returned coordinate arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .frechet import WeightedSample, cyclic_mean, sturm_mean
from .geodesic import distance
from .locus import ProjectorConfig, VertexSet, project_all
from .pca import fit_component
from .trees import PhyloTree


def check_tree_sample(X, leaves=None) -> tuple[PhyloTree, ...]:
    """Validate a sample: nonempty, all trees, one taxon set.

    Trees over the same taxa in a different index order are reindexed onto
    the first tree's (or the given leaf set's) ordering.
    """
    trees = tuple(X)
    if not trees:
        raise ValueError("X must contain at least one tree")
    for t in trees:
        if not isinstance(t, PhyloTree):
            raise TypeError(f"X must contain PhyloTree instances, got {type(t).__name__}")
    reference = leaves if leaves is not None else trees[0].leaves
    return tuple(t if t.leaves.labels == reference.labels else t.reindexed(reference)
                 for t in trees)


class FrechetMean(TransformerMixin, BaseEstimator):
    """Frechet mean of a tree sample; transform gives distances to the mean.

    Parameters mirror the underlying mean algorithms: ``method`` is
    ``'cyclic'`` (deterministic) or ``'sturm'`` (stochastic, uses ``seed``).
    """

    def __init__(self, method="cyclic", eps=None, window=10, max_iter=100_000,
                 seed=0, pendant_mode="ignore"):
        self.method = method
        self.eps = eps
        self.window = window
        self.max_iter = max_iter
        self.seed = seed
        self.pendant_mode = pendant_mode

    def fit(self, X, y=None, sample_weight=None):
        trees = check_tree_sample(X)
        sample = WeightedSample(trees, sample_weight)
        if self.method == "cyclic":
            result = cyclic_mean(sample, self.eps, self.window, self.max_iter,
                                 self.pendant_mode)
        elif self.method == "sturm":
            result = sturm_mean(sample, self.seed, self.eps, self.window,
                                self.max_iter, self.pendant_mode)
        else:
            raise ValueError("method must be 'cyclic' or 'sturm'")
        self.mean_ = result.mean
        self.objective_ = result.objective
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        return self

    def transform(self, X):
        if not hasattr(self, "mean_"):
            raise NotFittedError("call fit before transform")
        trees = check_tree_sample(X, self.mean_.leaves)
        return np.array([[distance(self.mean_, t, self.pendant_mode)]
                         for t in trees])


class LocusProjection(TransformerMixin, BaseEstimator):
    """Projection onto the locus surface spanned by fixed vertex trees.

    ``transform`` returns the simplex weight coordinates of the projected
    points, one row per tree; ``project`` returns the full per-tree results
    including distances and projected trees.
    """

    def __init__(self, vertices=None, method="geometric", eps=None, window=10,
                 restarts=3, resolution=50, max_iter=20_000, seed=0, n_jobs=1,
                 pendant_mode="ignore"):
        self.vertices = vertices
        self.method = method
        self.eps = eps
        self.window = window
        self.restarts = restarts
        self.resolution = resolution
        self.max_iter = max_iter
        self.seed = seed
        self.n_jobs = n_jobs
        self.pendant_mode = pendant_mode

    def _config(self):
        return ProjectorConfig(method=self.method, eps=self.eps,
                               window=self.window, restarts=self.restarts,
                               resolution=self.resolution, max_iter=self.max_iter,
                               seed=self.seed, n_jobs=self.n_jobs,
                               pendant_mode=self.pendant_mode)

    def fit(self, X=None, y=None):
        if self.vertices is None:
            raise ValueError("vertices must be set before fitting")
        self.vertices_ = (self.vertices if isinstance(self.vertices, VertexSet)
                          else VertexSet(check_tree_sample(self.vertices)))
        self.k_ = self.vertices_.k
        return self

    def project(self, X):
        if not hasattr(self, "vertices_"):
            raise NotFittedError("call fit before projecting")
        trees = check_tree_sample(X, self.vertices_.leaves)
        return project_all(trees, self.vertices_, self._config())

    def transform(self, X):
        return np.array([res.weights.p for res in self.project(X)])


class TreePCA(TransformerMixin, BaseEstimator):
    """Principal component of the given order fitted to a tree sample.

    ``fit`` searches for the vertex trees minimizing the projected sum of
    squares; ``transform`` returns the simplex coordinates of new trees on
    the fitted surface.
    """

    def __init__(self, order=2, kernels=None, restarts=3, conv_window=20,
                 conv_threshold=1e-3, seed=0, max_sweeps=200, n_jobs=1,
                 projector_eps=None, projector_restarts=3, pendant_mode="ignore"):
        self.order = order
        self.kernels = kernels
        self.restarts = restarts
        self.conv_window = conv_window
        self.conv_threshold = conv_threshold
        self.seed = seed
        self.max_sweeps = max_sweeps
        self.n_jobs = n_jobs
        self.projector_eps = projector_eps
        self.projector_restarts = projector_restarts
        self.pendant_mode = pendant_mode

    def fit(self, X, y=None):
        trees = check_tree_sample(X)
        config = None
        if self.projector_eps is not None:
            config = ProjectorConfig(eps=self.projector_eps,
                                     restarts=self.projector_restarts,
                                     pendant_mode=self.pendant_mode,
                                     n_jobs=self.n_jobs)
        component = fit_component(trees, self.order, self.kernels, self.restarts,
                                  self.conv_window, self.conv_threshold,
                                  self.seed, config, self.max_sweeps, self.n_jobs)
        self.component_ = component
        self.vertices_ = component.vertices
        self.stats_ = component.stats
        self.trace_ = component.trace
        return self

    def transform(self, X):
        if not hasattr(self, "vertices_"):
            raise NotFittedError("call fit before transform")
        projector = LocusProjection(vertices=self.vertices_, seed=self.seed,
                                    n_jobs=self.n_jobs,
                                    restarts=self.projector_restarts,
                                    pendant_mode=self.pendant_mode).fit()
        return projector.transform(X)

    def score(self, X=None, y=None):
        """Proportion-of-variance summary of the fitted surface."""
        if not hasattr(self, "stats_"):
            raise NotFittedError("call fit before score")
        return self.stats_.r_squared
