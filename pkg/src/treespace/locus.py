"""The locus of the weighted Frechet mean, and projections onto it.

For k+1 anchor trees V, the surface consists of the weighted Frechet means
mu(V, p) as the weight vector p ranges over the k-simplex. It contains the
anchors and the geodesics between them, generically has dimension k, and
serves as a k-th order principal component. Projection of a data tree onto
the surface is by exhaustive search over a simplex lattice (benchmark
quality, expensive) or by the geometric algorithm, a greedy variant of the
stochastic mean iteration that needs only geodesic operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ._util import derived_rng, parallel_map
from .frechet import WeightedSample, cyclic_mean, data_scale, sturm_mean
from .geodesic import (distance, geodesic, masks_distance, masks_step,
                       point_on_geodesic)
from .trees import PhyloTree, TopologyId, TreeError


class UnsupportedOrderError(TreeError):
    pass


@dataclass(frozen=True)
class SimplexPoint:
    """A probability vector over the k+1 vertices (a point of the simplex)."""

    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if not p:
            raise ValueError("empty weight vector")
        if any(x < 0 for x in p):
            raise ValueError(f"negative weight in {p}")
        total = sum(p)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"weights sum to {total}, not 1")
        if abs(total - 1.0) > 1e-12:
            p = tuple(x / total for x in p)
        object.__setattr__(self, "p", p)

    @classmethod
    def vertex(cls, k: int, i: int) -> "SimplexPoint":
        return cls(tuple(1.0 if j == i else 0.0 for j in range(k + 1)))

    @classmethod
    def barycenter(cls, k: int) -> "SimplexPoint":
        return cls(tuple(1.0 / (k + 1) for _ in range(k + 1)))

    @property
    def k(self) -> int:
        return len(self.p) - 1

    def argmax(self) -> int:
        return max(range(len(self.p)), key=lambda i: self.p[i])


class VertexSet:
    """The k+1 anchor trees of a locus surface, over one leaf set."""

    __slots__ = ("vertices",)

    def __init__(self, vertices: Sequence[PhyloTree]):
        vertices = tuple(vertices)
        if len(vertices) < 2:
            raise ValueError("a vertex set needs at least 2 trees (k >= 1)")
        leaves = vertices[0].leaves
        vertices = tuple(v if v.leaves.labels == leaves.labels else v.reindexed(leaves)
                         for v in vertices)
        object.__setattr__(self, "vertices", vertices)

    def __setattr__(self, name, value):
        raise AttributeError("VertexSet is immutable")

    def __getstate__(self):
        return self.vertices

    def __setstate__(self, state):
        object.__setattr__(self, "vertices", state)

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __getitem__(self, i):
        return self.vertices[i]

    @property
    def k(self) -> int:
        return len(self.vertices) - 1

    @property
    def leaves(self):
        return self.vertices[0].leaves

    def scale(self, pendant_mode: str = "ignore") -> float:
        return data_scale(self.vertices, pendant_mode)


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of projecting one tree onto a locus surface.

    ``tie_count`` reports how many examined weight vectors reached within
    tolerance of the minimal distance; more than one flags a sticky or flat
    stretch of the surface where the reported weights are not unique.
    """

    projected: PhyloTree
    weights: SimplexPoint
    distance: float
    iterations: int
    restarts_used: int
    converged: bool = True
    tie_count: int = 1


@dataclass(frozen=True)
class FitStatistics:
    """Summary of a surface's fit to a data set."""

    sum_sq_projected: float
    r_squared: float
    per_datum: tuple[ProjectionResult, ...]
    mean_of_projections: PhyloTree


@dataclass(frozen=True)
class ProjectorConfig:
    """Settings shared by the projection routines.

    ``eps`` defaults to 1e-3 times the data scale of the anchors plus datum;
    ``mean_budget`` caps the per-lattice-point mean iterations in the
    exhaustive search's screening stage.
    """

    method: str = "geometric"
    eps: float | None = None
    window: int = 10
    restarts: int = 3
    resolution: int = 50
    max_iter: int = 20_000
    seed: int = 0
    n_jobs: int = 1
    pendant_mode: str = "ignore"
    mean_budget: int = 150


# ---------------------------------------------------------------------------
# surface evaluation
# ---------------------------------------------------------------------------

def surface_point(V: VertexSet, p: SimplexPoint, method: str = "cyclic",
                  eps: float | None = None, window: int = 10,
                  rng_seed: int = 0, max_iter: int = 100_000,
                  pendant_mode: str = "ignore") -> PhyloTree:
    """The weighted Frechet mean mu(V, p): one point of the locus surface."""
    if len(p.p) != len(V):
        raise ValueError(f"weight vector has {len(p.p)} entries for {len(V)} vertices")
    for i, w in enumerate(p.p):
        if w == 1.0:
            return V[i]
    sample = WeightedSample(V.vertices, p.p)
    if method == "cyclic":
        return cyclic_mean(sample, eps, window, max_iter, pendant_mode).mean
    if method == "sturm":
        return sturm_mean(sample, rng_seed, eps, window, max_iter, pendant_mode).mean
    raise ValueError("method must be 'cyclic' or 'sturm'")


def simplex_lattice(k: int, resolution: int) -> list[SimplexPoint]:
    """Lattice {counts/resolution} over the k-simplex, lexicographic order."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if k == 1:
        return [SimplexPoint((a / resolution, (resolution - a) / resolution))
                for a in range(resolution + 1)]
    if k == 2:
        out = []
        for a in range(resolution + 1):
            for b in range(resolution - a + 1):
                c = resolution - a - b
                out.append(SimplexPoint((a / resolution, b / resolution, c / resolution)))
        return out
    raise UnsupportedOrderError(f"simplex lattices are supported for k <= 2, got k={k}")


def _mean_pendants(V: VertexSet, p: SimplexPoint) -> tuple[dict, float]:
    """Pendant lengths of the weighted mean: common splits average linearly."""
    pendant: dict[int, float] = {}
    root = 0.0
    for tree, w in zip(V.vertices, p.p):
        if w == 0.0:
            continue
        root += w * tree.root_length
        for m, l in tree.pendant_masks().items():
            pendant[m] = pendant.get(m, 0.0) + w * l
    return {m: v for m, v in pendant.items() if v > 1e-15}, root


def _fused_cyclic(vertex_masks, weights, steps=None, eps=None,
                  window=10, max_steps=100_000) -> dict:
    """The cyclic mean iteration on raw internal-split dicts.

    Either runs exactly ``steps`` iterations (screening) or, with ``eps``,
    stops once ``window`` consecutive cycles each displace the iterate by
    less than eps (the accuracy then tracks the displacement scale).
    """
    pairs = [(dict(m), w) for m, w in zip(vertex_masks, weights) if w > 0.0]
    masks = [m for m, _ in pairs]
    wts = [w for _, w in pairs]
    n = len(masks)
    mu = dict(masks[0])
    if n == 1:
        return mu
    budget = steps if steps is not None else max_steps
    quiet = 0
    for i in range(budget):
        j = i % n
        t = min(1.0, n * wts[j] / (i // n + 2))
        mu, length = masks_step(mu, masks[j], t)
        if eps is not None:
            if t * length < eps:
                quiet += 1
                if quiet >= window * n:
                    break
            else:
                quiet = 0
    return mu


def _budgeted_mean(V: VertexSet, p: SimplexPoint, steps: int,
                   pendant_mode: str) -> PhyloTree:
    """Cheap screening mean: the cyclic iteration run for a fixed step count."""
    for i, w in enumerate(p.p):
        if w == 1.0:
            return V[i]
    internal = _fused_cyclic([v.internal_masks() for v in V.vertices], p.p,
                             steps=steps)
    pendant, root = _mean_pendants(V, p)
    return PhyloTree.from_masks(V.leaves, internal, pendant, root)


def exhaustive_project(z: PhyloTree, V: VertexSet, resolution: int = 50,
                       eps: float | None = None, pendant_mode: str = "ignore",
                       mean_budget: int = 150, window: int = 10,
                       max_iter: int = 20_000,
                       refine_cap: int = 150) -> ProjectionResult:
    """Projection by exhaustive search over a simplex lattice.

    Every lattice point is screened with a budgeted mean; candidates within
    the screening slack of the best are then re-evaluated with a converged
    mean, and the minimizer is returned (ties broken towards the
    lexicographically smallest weight vector). On nearly flat landscapes at
    most ``refine_cap`` screening leaders are refined; anything dropped was
    within the screening slack of the reported minimum, so the reported
    distance errs on the conservative (larger) side by at most that slack.
    Supported for k in {1, 2}.
    """
    from math import sqrt

    k = V.k
    if k > 2:
        raise UnsupportedOrderError("exhaustive projection supports k <= 2")
    scale = data_scale(tuple(V.vertices) + (z,), pendant_mode)
    if eps is None:
        eps = 1e-3 * scale
    eps = max(eps, 1e-15)
    lattice = simplex_lattice(k, resolution)
    zint = z.internal_masks()
    vmasks = [v.internal_masks() for v in V.vertices]

    def pendant_sq(p: SimplexPoint) -> float:
        if pendant_mode != "include":
            return 0.0
        pend, root = _mean_pendants(V, p)
        zp = z.pendant_masks()
        total = sum((pend.get(m, 0.0) - zp.get(m, 0.0)) ** 2
                    for m in pend.keys() | zp.keys())
        return total + (root - z.root_length) ** 2

    coarse = []
    for p in lattice:
        mu = _fused_cyclic(vmasks, p.p, steps=mean_budget)
        coarse.append(sqrt(masks_distance(zint, mu) ** 2 + pendant_sq(p)))
    best_coarse = min(coarse)
    # screening accuracy of the budgeted mean is about scale_V / cycles
    slack = 3.0 * V.scale(pendant_mode) / max(1, mean_budget // (k + 1)) + 2.0 * eps
    candidates = sorted(
        ((d0, p) for p, d0 in zip(lattice, coarse) if d0 <= best_coarse + slack),
        key=lambda item: (item[0], item[1].p))[:refine_cap]

    refined: list[tuple[float, SimplexPoint, dict]] = []
    for _, p in candidates:
        mu = _fused_cyclic(vmasks, p.p, eps=eps, window=window,
                           max_steps=max_iter)
        refined.append((sqrt(masks_distance(zint, mu) ** 2 + pendant_sq(p)), p, mu))
    dist, p_best, mu_best = min(refined, key=lambda item: (item[0], item[1].p))
    ties = sum(1 for d, _, _ in refined if d <= dist + eps)
    pendant, root = _mean_pendants(V, p_best)
    projected = PhyloTree.from_masks(V.leaves, mu_best, pendant, root)
    return ProjectionResult(projected, p_best, dist,
                            iterations=len(lattice) + len(refined),
                            restarts_used=1, converged=True, tie_count=ties)


def _perimeter_point(V: VertexSet, rng, pendant_mode: str) -> PhyloTree:
    """Uniform draw from the perimeter: the union of the edge geodesics."""
    pairs = [(i, j) for i in range(len(V)) for j in range(i + 1, len(V))]
    geos = [geodesic(V[i], V[j], pendant_mode) for i, j in pairs]
    total = sum(g.length for g in geos)
    if total <= 0:
        return V[0]
    pickpoint = rng.random() * total
    for g in geos:
        if pickpoint <= g.length or g is geos[-1]:
            t = pickpoint / g.length if g.length > 0 else 0.0
            return point_on_geodesic(g, min(max(t, 0.0), 1.0))
        pickpoint -= g.length
    return V[0]


class _DictWindow:
    """Pairwise-within-eps stop rule over raw-dict iterates.

    Mirrors the mean algorithms' convergence test; a known step displacement
    short-circuits the distance computations while steps are still large.
    """

    def __init__(self, eps, window, pendant_fn=None):
        self.eps = eps
        self.window = max(2, int(window))
        self.pendant_fn = pendant_fn
        self.members = []
        self.flags = []

    def _dist(self, a, b):
        d2 = masks_distance(a[0], b[0]) ** 2
        if self.pendant_fn is not None:
            d2 += self.pendant_fn(a[1], b[1])
        return d2 ** 0.5

    def push(self, state, displacement) -> bool:
        if displacement < self.eps:
            ok = all(self._dist(state, m) < self.eps for m in self.members)
        else:
            ok = False
        self.members.append(state)
        self.flags.append(ok)
        if len(self.members) > self.window:
            self.members.pop(0)
            self.flags.pop(0)
        return len(self.members) == self.window and all(self.flags[1:])


def geometric_project(z: PhyloTree, V: VertexSet, eps: float | None = None,
                      window: int = 10, restarts: int = 3, rng_seed: int = 0,
                      max_iter: int = 20_000,
                      pendant_mode: str = "ignore") -> ProjectionResult:
    """Greedy geodesic projection of z onto the locus surface.

    Each restart starts from a uniform point of the surface's perimeter and
    repeatedly moves a proportion 1/(i+2) towards whichever anchor brings
    the iterate closest to z; the visit frequencies estimate the weight
    vector. The best restart by final distance wins. Under stickiness the
    reported weights are a frequency estimate and need not be unique.
    """
    from math import sqrt

    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    k = V.k
    scale = data_scale(tuple(V.vertices) + (z,), pendant_mode)
    if eps is None:
        eps = 1e-3 * scale
    eps = max(eps, 1e-15)
    include = pendant_mode == "include"
    zint = z.internal_masks()
    vmasks = [v.internal_masks() for v in V.vertices]
    vpend = [dict(v.pendant_masks()) for v in V.vertices]
    vpend_root = [v.root_length for v in V.vertices]
    zpend = (dict(z.pendant_masks()), z.root_length)

    def pendant_gap_sq(a, b):
        pa, ra = a
        pb, rb = b
        total = sum((pa.get(m, 0.0) - pb.get(m, 0.0)) ** 2
                    for m in pa.keys() | pb.keys())
        return total + (ra - rb) ** 2

    def dist_to_z(masks, pend):
        d2 = masks_distance(zint, masks) ** 2
        if include:
            d2 += pendant_gap_sq(pend, zpend)
        return sqrt(d2)

    best = None
    for r in range(restarts):
        rng = derived_rng(rng_seed, "project", r)
        start = _perimeter_point(V, rng, pendant_mode)
        mu = dict(start.internal_masks())
        pend = (dict(start.pendant_masks()), start.root_length)
        p = [0.0] * (k + 1)
        conv = _DictWindow(eps, window, pendant_gap_sq if include else None)
        conv.push((mu, pend), float("inf"))
        converged = False
        iterations = 0
        for i in range(max_iter):
            s = 1.0 / (i + 2)
            best_j = -1
            best_d = float("inf")
            best_y = mu
            best_len = 0.0
            for j in range(k + 1):
                y, length = masks_step(mu, vmasks[j], s)
                if include:
                    length = sqrt(length ** 2 + pendant_gap_sq(pend, (vpend[j], vpend_root[j])))
                cand_pend = pend
                if include:
                    merged = {m: (1 - s) * pend[0].get(m, 0.0) + s * vpend[j].get(m, 0.0)
                              for m in pend[0].keys() | vpend[j].keys()}
                    cand_pend = (merged, (1 - s) * pend[1] + s * vpend_root[j])
                d = dist_to_z(y, cand_pend)
                if d < best_d:
                    best_j, best_d, best_y, best_len = j, d, y, length
                    best_pend = cand_pend
            mu = best_y
            pend = best_pend
            for idx in range(k + 1):
                p[idx] = i * p[idx] / (i + 1)
            p[best_j] += 1.0 / (i + 1)
            iterations = i + 1
            if conv.push((mu, pend), s * best_len):
                converged = True
                break
        d_final = dist_to_z(mu, pend)
        if best is None or d_final < best[0]:
            best = (d_final, dict(mu), pend, list(p), iterations, converged)

    d_final, mu, pend, p, iterations, converged = best
    total = sum(p)
    weights = SimplexPoint(tuple(x / total for x in p)) if total > 0 else \
        SimplexPoint.barycenter(k)
    if include:
        pendant, root = pend
    else:
        # pendants do not drive the projection here; report the weighted
        # average, the pendant state of the corresponding surface point
        pendant, root = _mean_pendants(V, weights)
    projected = PhyloTree.from_masks(V.leaves, mu, pendant, root)
    return ProjectionResult(projected, weights, d_final, iterations,
                            restarts_used=restarts, converged=converged)


# ---------------------------------------------------------------------------
# fit statistics over a data set
# ---------------------------------------------------------------------------

def _project_one(args):
    z, V, config, index = args
    if config.method == "exhaustive":
        return exhaustive_project(z, V, config.resolution, config.eps,
                                  config.pendant_mode, config.mean_budget,
                                  config.window, config.max_iter)
    seed = derived_rng(config.seed, "datum", index).randrange(2 ** 62)
    return geometric_project(z, V, config.eps, config.window, config.restarts,
                             seed, config.max_iter, config.pendant_mode)


def project_all(Z: Sequence[PhyloTree], V: VertexSet,
                config: ProjectorConfig = ProjectorConfig()) -> list[ProjectionResult]:
    """Project every tree of Z onto the surface; deterministic given the seed.

    Per-datum random streams are derived from (seed, index), so results do
    not depend on how the work is split across processes.
    """
    tasks = [(z, V, config, i) for i, z in enumerate(Z)]
    return parallel_map(_project_one, tasks, config.n_jobs)


def sum_sq_projected(Z: Sequence[PhyloTree], V: VertexSet,
                     config: ProjectorConfig = ProjectorConfig(),
                     mean_eps: float | None = None) -> FitStatistics:
    """Projected sum of squares and the variance-decomposition summary.

    r-squared compares the spread of the projected points around their own
    Frechet mean with the residual projection distances,

        r2 = spread / (residual + spread),

    so it grows towards 1 as the surface explains more of the variation.
    """
    if not Z:
        raise ValueError("empty data set")
    results = project_all(Z, V, config)
    residual = sum(res.distance ** 2 for res in results)
    projections = [res.projected for res in results]
    mean = cyclic_mean(WeightedSample(projections), mean_eps,
                       pendant_mode=config.pendant_mode).mean
    spread = sum(distance(mean, t, config.pendant_mode) ** 2 for t in projections)
    if residual + spread <= 0.0:
        r2 = 1.0
    else:
        r2 = spread / (residual + spread)
    return FitStatistics(residual, r2, tuple(results), mean)


# ---------------------------------------------------------------------------
# topology map of the simplex
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplexTopologyMap:
    """Topology of mu(V, p) over a lattice of the weight simplex.

    ``region_labels`` number the contiguous same-topology patches; labels
    are assigned in first-appearance order over the lattice.
    """

    resolution: int
    points: tuple[SimplexPoint, ...]
    topologies: tuple[TopologyId, ...]
    region_labels: tuple[int, ...]

    @property
    def n_regions(self) -> int:
        return len(set(self.region_labels))

    def regions(self) -> dict[int, TopologyId]:
        out = {}
        for label, topo in zip(self.region_labels, self.topologies):
            out.setdefault(label, topo)
        return out


def simplex_topology_map(V: VertexSet, resolution: int = 40,
                         topology_tol: float | None = None,
                         pendant_mode: str = "ignore",
                         mean_budget: int = 600, n_jobs: int = 1) -> SimplexTopologyMap:
    """Topology of the surface over the weight lattice, for k = 2 surfaces.

    Splits thinner than ``topology_tol`` are treated as absent when reading
    off a topology, so sticky stretches of the surface show up as unresolved
    regions rather than as noise-thin resolved ones. The default tolerance
    matches the accuracy of the budgeted mean iteration.
    """
    if V.k != 2:
        raise UnsupportedOrderError("simplex topology maps are defined for k = 2")
    if topology_tol is None:
        topology_tol = 3.0 * V.scale(pendant_mode) / max(1, mean_budget // 3)
    lattice = simplex_lattice(2, resolution)
    tasks = [(V, p, mean_budget, pendant_mode, topology_tol) for p in lattice]
    topologies = parallel_map(_topology_at, tasks, n_jobs)

    index = {}
    for i, p in enumerate(lattice):
        a = round(p.p[0] * resolution)
        b = round(p.p[1] * resolution)
        index[(a, b)] = i

    parent = list(range(len(lattice)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for (a, b), i in index.items():
        for da, db in ((1, 0), (0, 1), (1, -1)):
            j = index.get((a + da, b + db))
            if j is not None and topologies[i] == topologies[j]:
                union(i, j)

    labels = []
    label_of_root: dict[int, int] = {}
    for i in range(len(lattice)):
        root = find(i)
        if root not in label_of_root:
            label_of_root[root] = len(label_of_root)
        labels.append(label_of_root[root])
    return SimplexTopologyMap(resolution, tuple(lattice), tuple(topologies), tuple(labels))


def _topology_at(args):
    V, p, budget, pendant_mode, tol = args
    mean = _budgeted_mean(V, p, budget, pendant_mode)
    masks = tuple(sorted(m for m, v in mean.internal_masks().items() if v > tol))
    return TopologyId(masks, mean.leaves.n_taxa)
