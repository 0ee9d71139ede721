"""Principal components: fitting locus surfaces that minimize projected
sum of squares.

The k-th order component is a locus surface spanned by k+1 vertex trees.
Fitting is a greedy stochastic search: proposal kernels perturb one vertex
at a time, and a proposal is kept exactly when it lowers the projected sum
of squares of the data. The order-1 case is the principal geodesic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ._util import derived_rng
from .frechet import data_scale
from .geodesic import geodesic, point_on_geodesic
from .locus import (FitStatistics, ProjectorConfig, VertexSet,
                    exhaustive_project, geometric_project, sum_sq_projected)
from .simulate import random_walk
from .trees import PhyloTree, TreeError


class EmptyDataError(TreeError):
    pass


class InsufficientDataError(TreeError):
    pass


@dataclass(frozen=True)
class ProposalKernel:
    """A way of proposing a replacement for one vertex of the surface.

    kinds:
      ``data_resample``  a uniform draw from the data set;
      ``beta_blend``     a Beta(alpha, beta)-distributed point on the
                         geodesic from the current vertex to a uniform draw
                         from the data;
      ``random_walk``    a random walk from the current vertex
                         (``steps`` steps of size ``step_size``).
    """

    kind: str
    alpha: float = 2.0
    beta: float = 2.0
    steps: int = 1
    step_size: float = 0.05

    def __post_init__(self):
        if self.kind not in ("data_resample", "beta_blend", "random_walk"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "beta_blend" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("beta_blend parameters must be positive")
        if self.kind == "random_walk" and (self.steps < 1 or self.step_size <= 0):
            raise ValueError("random_walk needs steps >= 1 and step_size > 0")

    @classmethod
    def data_resample(cls) -> "ProposalKernel":
        return cls("data_resample")

    @classmethod
    def beta_blend(cls, alpha: float = 2.0, beta: float = 2.0) -> "ProposalKernel":
        return cls("beta_blend", alpha=alpha, beta=beta)

    @classmethod
    def random_walk(cls, steps: int, step_size: float) -> "ProposalKernel":
        return cls("random_walk", steps=steps, step_size=step_size)


def default_kernels(scale: float) -> tuple[ProposalKernel, ...]:
    """One global, one interpolating and two local kernels, sized to the data."""
    return (ProposalKernel.data_resample(),
            ProposalKernel.beta_blend(2.0, 2.0),
            ProposalKernel.random_walk(1, 0.05 * scale),
            ProposalKernel.random_walk(5, 0.02 * scale))


def propose(kernel: ProposalKernel, x: PhyloTree, data, rng,
            pendant_mode: str = "ignore") -> PhyloTree:
    """Draw one replacement tree for vertex x from the kernel."""
    if kernel.kind == "random_walk":
        return random_walk(x, kernel.steps, kernel.step_size, rng)
    if not data:
        raise EmptyDataError("kernel needs a nonempty data set to resample from")
    z = data[rng.randrange(len(data))]
    if kernel.kind == "data_resample":
        return z
    t = rng.betavariate(kernel.alpha, kernel.beta)
    g = geodesic(x, z, pendant_mode)
    if g.length == 0.0:
        return x
    return point_on_geodesic(g, t)


@dataclass(frozen=True)
class FittedComponent:
    """A fitted principal component of the given order."""

    order: int
    vertices: VertexSet
    stats: FitStatistics
    trace: tuple[tuple[int, float], ...]
    seed: int


def _objective(Z, V, config: ProjectorConfig, seed: int, abort_above: float | None):
    """Projected sum of squares with a single projection restart per datum,
    early-aborted against the incumbent.

    The per-datum terms are nonnegative, so once the partial sum passes the
    incumbent the proposal is already rejected and the remaining projections
    are skipped; accepted proposals always carry complete sums.
    """
    total = 0.0
    for i, z in enumerate(Z):
        if config.method == "exhaustive":
            res = exhaustive_project(z, V, config.resolution, config.eps,
                                     config.pendant_mode, config.mean_budget,
                                     config.window, config.max_iter)
        else:
            datum_seed = derived_rng(seed, i).randrange(2 ** 62)
            res = geometric_project(z, V, config.eps, config.window, 1,
                                    datum_seed, config.max_iter,
                                    config.pendant_mode)
        total += res.distance ** 2
        if abort_above is not None and total > abort_above:
            return None
    return total


def fit_component(Z, k: int, kernels=None, restarts: int = 3,
                  conv_window: int = 20, conv_threshold: float = 1e-3,
                  seed: int = 0, config: ProjectorConfig | None = None,
                  max_sweeps: int = 200, n_jobs: int = 1) -> FittedComponent:
    """Fit the order-k principal component to the data trees Z.

    Sweeps over vertex positions and kernels, accepting a proposal exactly
    when it lowers the projected sum of squares (computed with a single
    projection restart during the search). The run stops once the relative
    improvement over ``conv_window`` sweeps falls below ``conv_threshold``;
    the best of ``restarts`` independent runs is reported with full-restart
    projection statistics. Deterministic for fixed seed and inputs.
    """
    Z = list(Z)
    if len(Z) < k + 1:
        raise InsufficientDataError(f"need at least {k + 1} trees to fit order {k}")
    if k < 1:
        raise ValueError("order k must be >= 1")
    scale = data_scale(Z)
    if kernels is None:
        kernels = default_kernels(scale)
    # the search tolerates a noisy objective; the reported statistics do not
    final_eps = config.eps if config is not None else max(1e-3 * scale, 1e-12)
    if config is None:
        config = ProjectorConfig(eps=max(1e-2 * scale, 1e-12), n_jobs=n_jobs)

    best_vertices = None
    best_d2 = float("inf")
    best_trace = None

    for restart in range(restarts):
        rng = derived_rng(seed, "fit", restart)
        indices = rng.sample(range(len(Z)), k + 1)
        V = VertexSet([Z[i] for i in indices])
        d2 = _objective(Z, V, config, derived_rng(seed, "obj", restart, 0, 0).randrange(2 ** 62), None)
        trace = [(0, d2)]
        window_ref = d2
        sweeps_since_check = 0
        for sweep in range(1, max_sweeps + 1):
            for vi in range(k + 1):
                for ki, kernel in enumerate(kernels):
                    w = propose(kernel, V[vi], Z, rng, config.pendant_mode)
                    candidate = VertexSet([w if j == vi else V[j]
                                           for j in range(k + 1)])
                    cand_seed = derived_rng(seed, "obj", restart, sweep,
                                            vi * len(kernels) + ki).randrange(2 ** 62)
                    cand_d2 = _objective(Z, candidate, config, cand_seed, d2)
                    if cand_d2 is not None and cand_d2 < d2:
                        V, d2 = candidate, cand_d2
            trace.append((sweep, d2))
            sweeps_since_check += 1
            if sweeps_since_check >= conv_window:
                if window_ref <= 0 or (window_ref - d2) / window_ref < conv_threshold:
                    break
                window_ref = d2
                sweeps_since_check = 0
        if d2 < best_d2:
            best_vertices, best_d2, best_trace = V, d2, trace

    final_seed = derived_rng(seed, "final").randrange(2 ** 62)
    stats = sum_sq_projected(Z, best_vertices,
                             replace(config, seed=final_seed, n_jobs=n_jobs,
                                     eps=final_eps))
    return FittedComponent(k, best_vertices, stats, tuple(best_trace), seed)


def fit_principal_geodesic(Z, kernels=None, restarts: int = 3,
                           conv_window: int = 20, conv_threshold: float = 1e-3,
                           seed: int = 0, config: ProjectorConfig | None = None,
                           max_sweeps: int = 200, n_jobs: int = 1) -> FittedComponent:
    """The order-1 component: a geodesic segment fitted to the data."""
    return fit_component(Z, 1, kernels, restarts, conv_window, conv_threshold,
                         seed, config, max_sweeps, n_jobs)
