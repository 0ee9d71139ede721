"""Weighted Frechet means of tree samples.

The weighted Frechet mean minimizes the weighted sum of squared geodesic
distances to the sample; in tree-space it exists and is unique. Two
iterative algorithms are provided, both of the proximal form "move a
shrinking proportion of the way along the geodesic towards a data point":

* ``sturm_mean`` picks the data point at random according to the weights and
  moves a proportion 1/(i+2) at iteration i;
* ``cyclic_mean`` visits the data points in a fixed cyclic order and folds
  the weights into the step sizes instead, which makes it deterministic.

Both stop once the last ``window`` iterates all lie pairwise within ``eps``
of one another.
"""

from __future__ import annotations

from dataclasses import dataclass

from ._util import derived_rng
from .geodesic import distance, geodesic, point_on_geodesic
from .trees import LeafSetMismatchError, PhyloTree, TreeError


class EmptySampleError(TreeError):
    pass


class WeightedSample:
    """Trees over one leaf set with nonnegative weights normalized to sum 1."""

    __slots__ = ("trees", "weights")

    def __init__(self, trees, weights=None):
        trees = tuple(trees)
        if not trees:
            raise EmptySampleError("sample contains no trees")
        leaves = trees[0].leaves
        aligned = []
        for t in trees:
            if t.leaves.labels != leaves.labels:
                t = t.reindexed(leaves)
            aligned.append(t)
        if weights is None:
            weights = [1.0] * len(trees)
        weights = [float(w) for w in weights]
        if len(weights) != len(trees):
            raise ValueError("need one weight per tree")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be nonnegative")
        total = sum(weights)
        if total <= 0:
            raise ValueError("weights must not all be zero")
        object.__setattr__(self, "trees", tuple(aligned))
        object.__setattr__(self, "weights", tuple(w / total for w in weights))

    def __setattr__(self, name, value):
        raise AttributeError("WeightedSample is immutable")

    def __getstate__(self):
        return (self.trees, self.weights)

    def __setstate__(self, state):
        for name, value in zip(self.__slots__, state):
            object.__setattr__(self, name, value)

    def __len__(self):
        return len(self.trees)

    @property
    def leaves(self):
        return self.trees[0].leaves

    def nonzero(self) -> tuple[tuple[PhyloTree, ...], tuple[float, ...]]:
        """Trees and weights with zero-weight entries dropped."""
        pairs = [(t, w) for t, w in zip(self.trees, self.weights) if w > 0.0]
        trees, weights = zip(*pairs)
        return trees, weights


@dataclass(frozen=True)
class MeanResult:
    mean: PhyloTree
    objective: float
    iterations: int
    converged: bool


def frechet_objective(y: PhyloTree, sample: WeightedSample,
                      pendant_mode: str = "ignore") -> float:
    """Weighted sum of squared distances from y to the sample."""
    if y.leaves.labels != sample.leaves.labels:
        raise LeafSetMismatchError("tree and sample are over different leaf sets")
    return sum(w * distance(y, z, pendant_mode) ** 2
               for z, w in zip(sample.trees, sample.weights) if w > 0.0)


def data_scale(trees, pendant_mode: str = "ignore", cap: int = 20) -> float:
    """Mean pairwise distance, the length scale used for default tolerances.

    Computed over at most the first *cap* trees to keep the cost bounded.
    """
    trees = list(trees)[:cap]
    if len(trees) < 2:
        return trees[0].norm(pendant_mode) if trees else 0.0
    total = 0.0
    count = 0
    for i, x in enumerate(trees):
        for y in trees[i + 1:]:
            total += distance(x, y, pendant_mode)
            count += 1
    return total / count


class _ConvergenceWindow:
    """Stop signal: the last `window` iterates lie pairwise within eps.

    Each insertion is checked against the iterates currently in the window,
    so every pair inside the window has been examined by the time it is
    full; a known displacement from the previous iterate short-circuits the
    check when it already exceeds eps.
    """

    def __init__(self, eps: float, window: int, pendant_mode: str):
        self.eps = eps
        self.window = max(2, int(window))
        self.pendant_mode = pendant_mode
        self.members: list[PhyloTree] = []
        self.flags: list[bool] = []

    def push(self, tree: PhyloTree, step_displacement: float) -> bool:
        if step_displacement < self.eps:
            ok = all(distance(tree, m, self.pendant_mode) < self.eps
                     for m in self.members)
        else:
            ok = False
        self.members.append(tree)
        self.flags.append(ok)
        if len(self.members) > self.window:
            self.members.pop(0)
            self.flags.pop(0)
        return (len(self.members) == self.window
                and all(self.flags[1:]))


def _run_mean(sample: WeightedSample, pick, eps, window, max_iter,
              pendant_mode, start) -> MeanResult:
    mu = start
    conv = _ConvergenceWindow(eps, window, pendant_mode)
    conv.push(mu, float("inf"))
    iterations = 0
    converged = False
    for i in range(max_iter):
        target, proportion = pick(i)
        iterations = i + 1
        if target is mu:
            if conv.push(mu, 0.0):
                converged = True
                break
            continue
        g = geodesic(mu, target, pendant_mode)
        mu = point_on_geodesic(g, proportion)
        if conv.push(mu, proportion * g.length):
            converged = True
            break
    objective = frechet_objective(mu, sample, pendant_mode)
    return MeanResult(mu, objective, iterations, converged)


def sturm_mean(sample: WeightedSample, rng_seed: int = 0, eps: float | None = None,
               window: int = 10, max_iter: int = 100_000,
               pendant_mode: str = "ignore") -> MeanResult:
    """Stochastic proximal-point mean: sample a tree by weight, move 1/(i+2).

    Non-convergence within ``max_iter`` is reported through the result, not
    raised. ``eps`` defaults to 1e-4 times the sample's mean pairwise
    distance.
    """
    trees, weights = sample.nonzero()
    if len(trees) == 1:
        only = trees[0]
        return MeanResult(only, 0.0, 1, True)
    if eps is None:
        eps = 1e-4 * data_scale(trees, pendant_mode)
    eps = max(eps, 1e-15)
    rng = derived_rng(rng_seed, "sturm")
    cumulative = []
    acc = 0.0
    for w in weights:
        acc += w
        cumulative.append(acc)
    cumulative[-1] = 1.0

    from bisect import bisect_left

    def draw():
        return trees[bisect_left(cumulative, rng.random())]

    def pick(i):
        return draw(), 1.0 / (i + 2)

    return _run_mean(sample, pick, eps, window, max_iter, pendant_mode, draw())


def cyclic_mean(sample: WeightedSample, eps: float | None = None,
                window: int = 10, max_iter: int = 100_000,
                pendant_mode: str = "ignore") -> MeanResult:
    """Deterministic mean: cycle through the data, weights folded into steps.

    At global step i the tree with index i mod n is used with step
    min(1, n*w_j/(cycle+2)) where cycle = i // n, so equal weights reproduce
    the plain 1/(cycle+2) proximal schedule.
    """
    trees, weights = sample.nonzero()
    if len(trees) == 1:
        return MeanResult(trees[0], 0.0, 1, True)
    if eps is None:
        eps = 1e-4 * data_scale(trees, pendant_mode)
    eps = max(eps, 1e-15)
    n = len(trees)

    def pick(i):
        j = i % n
        cycle = i // n
        return trees[j], min(1.0, n * weights[j] / (cycle + 2))

    return _run_mean(sample, pick, eps, window, max_iter, pendant_mode, trees[0])
