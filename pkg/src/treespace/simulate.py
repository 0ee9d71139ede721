"""Synthetic tree generation: coalescent samplers, topology rearrangements,
random walks, and dispersed data sets around a known locus surface.

Trees are generated over numbered leaf sets where taxon ``0`` is the root
marker: coalescent processes run on taxa 1..N and the final ancestor is
attached to leaf 0 by a unit-length root edge (the root edge never enters
statistics computed in the default pendant mode).
"""

from __future__ import annotations

from dataclasses import dataclass

from ._util import LENGTH_CUTOFF, derived_rng
from .locus import (ProjectorConfig, SimplexPoint, VertexSet,
                    sum_sq_projected, surface_point)
from .trees import LeafSet, PhyloTree, Split, TreeError, masks_compatible

WALK_STEPS = 5  # steps per dispersal walk in make_surface_dataset


class InvalidEdgeError(TreeError):
    pass


class InvalidGraftError(TreeError):
    pass


# ---------------------------------------------------------------------------
# coalescent samplers
# ---------------------------------------------------------------------------

def kingman_tree(n_taxa: int, seed: int = 0, rng=None) -> PhyloTree:
    """Random fully resolved tree from the standard coalescent on 1..n_taxa.

    Pairs of lineages merge uniformly at random, with exponential waiting
    times at rate k(k-1)/2 while k lineages remain; edge lengths are the
    elapsed times.
    """
    if n_taxa < 2:
        raise ValueError("need at least 2 taxa")
    if rng is None:
        rng = derived_rng(seed, "kingman")
    leaves = LeafSet.numbered(n_taxa)
    active = [(1 << i, 0.0) for i in range(1, n_taxa + 1)]
    internal: dict[int, float] = {}
    pendant: dict[int, float] = {}
    now = 0.0
    while len(active) > 1:
        k = len(active)
        now += rng.expovariate(k * (k - 1) / 2.0)
        i, j = sorted(rng.sample(range(k), 2))
        mj, bj = active.pop(j)
        mi, bi = active.pop(i)
        for mask, born in ((mi, bi), (mj, bj)):
            if mask & (mask - 1):
                internal[mask] = now - born
            else:
                pendant[mask] = now - born
        active.append((mi | mj, now))
    internal.pop(leaves.full_mask, None)
    return PhyloTree.from_masks(leaves, internal, pendant, 1.0)


def _node_heights(tree: PhyloTree) -> dict[int, float]:
    """Height of each internal clade's node, assuming an ultrametric tree."""
    internal = tree.internal_masks()
    pendant = tree.pendant_masks()
    heights = {}
    for clade in internal:
        i = (clade & -clade).bit_length() - 1
        h = pendant.get(1 << i, 0.0)
        for s, l in internal.items():
            if s >> i & 1 and s & clade == s and s != clade:
                h += l
        heights[clade] = h
    return heights


def constrained_gene_tree(species_tree: PhyloTree, seed: int = 0,
                          theta: float = 1.0, rng=None) -> PhyloTree:
    """Gene tree under the multispecies coalescent within *species_tree*.

    One lineage starts per species; within each species-tree branch, pairs
    of lineages merge at rate k(k-1)/(2*theta), and unmerged lineages
    continue into the parent branch (and above the species root) until a
    single ancestor remains. The species tree must be time-calibrated
    (ultrametric over taxa 1..N), as coalescent trees are.
    """
    if rng is None:
        rng = derived_rng(seed, "msc")
    if theta <= 0:
        raise ValueError("theta must be positive")
    leaves = species_tree.leaves
    n = leaves.n_taxa
    full = leaves.full_mask
    splits = dict(species_tree.internal_masks())
    heights = _node_heights(species_tree)
    heights[full] = max((heights[s] + l for s, l in splits.items()),
                        default=0.0)
    if not splits:
        heights[full] = max(species_tree.pendant_masks().values(), default=0.0)

    def blocks_of(clade: int) -> list[int]:
        subs = [s for s in splits if s & clade == s and s != clade]
        maximal = [s for s in subs if not any(s & t == s and s != t for t in subs)]
        covered = 0
        for s in maximal:
            covered |= s
        out = list(maximal)
        rest = clade & ~covered
        while rest:
            low = rest & -rest
            out.append(low)
            rest ^= low
        return out

    internal: dict[int, float] = {}
    pendant: dict[int, float] = {}

    def record(mask: int, born: float, now: float):
        if now <= born:
            return
        if mask & (mask - 1):
            internal[mask] = now - born
        else:
            pendant[mask] = now - born

    def coalesce(lineages: list, start: float, stop: float) -> list:
        now = start
        while len(lineages) > 1:
            k = len(lineages)
            now += rng.expovariate(k * (k - 1) / (2.0 * theta))
            if now >= stop:
                break
            i, j = sorted(rng.sample(range(k), 2))
            mj, bj = lineages.pop(j)
            mi, bi = lineages.pop(i)
            record(mi, bi, now)
            record(mj, bj, now)
            lineages.append((mi | mj, now))
        return lineages

    def run(clade: int) -> list:
        if not clade & (clade - 1):
            return [(clade, 0.0)]
        entering = []
        for block in blocks_of(clade):
            arriving = run(block)
            top = heights[clade]
            entering.extend(coalesce(arriving, heights.get(block, 0.0), top))
        return entering

    survivors = []
    for block in blocks_of(full):
        survivors.extend(coalesce(run(block), heights.get(block, 0.0), heights[full]))
    survivors = coalesce(survivors, heights[full], float("inf"))
    internal.pop(full, None)
    return PhyloTree.from_masks(leaves, internal, pendant, 1.0)


def coalescent_quadruple(n_taxa: int, seed: int = 0, theta: float = 1.0):
    """A species tree and four gene trees within it: (u, v0, v1, v2, z)."""
    rng = derived_rng(seed, "quadruple")
    u = kingman_tree(n_taxa, rng=rng)
    genes = [constrained_gene_tree(u, theta=theta, rng=rng) for _ in range(4)]
    return (u, *genes)


# ---------------------------------------------------------------------------
# topology rearrangements
# ---------------------------------------------------------------------------

def _blocks_below(internal: dict, clade_or_none, n_taxa: int, leaf_pool: int):
    """Maximal splits and loose leaves directly under a node."""
    if clade_or_none is None:
        subs = list(internal)
        pool = leaf_pool
    else:
        subs = [s for s in internal if s & clade_or_none == s and s != clade_or_none]
        pool = clade_or_none
    maximal = [s for s in subs if not any(s & t == s and s != t for t in subs)]
    covered = 0
    for s in maximal:
        covered |= s
    blocks = list(maximal)
    rest = pool & ~covered
    while rest:
        low = rest & -rest
        blocks.append(low)
        rest ^= low
    return blocks


def nni_alternatives(tree: PhyloTree, edge: Split) -> tuple[Split, Split]:
    """The two splits that can replace *edge* in a nearest-neighbour swap.

    Requires the nodes at both ends of the edge to be binary (always true
    in a fully resolved tree).
    """
    internal = tree.internal_masks()
    s = edge.mask
    if s not in internal:
        raise InvalidEdgeError(f"{edge} is not an internal edge of the tree")
    n = tree.leaves.n_taxa
    below = _blocks_below(internal, s, n, tree.leaves.full_mask)
    if len(below) != 2:
        raise InvalidEdgeError(f"node below {edge} is not binary")
    supersets = [t for t in internal if s & t == s and s != t]
    parent = min(supersets, key=lambda t: bin(t).count("1")) if supersets else None
    siblings = [b for b in _blocks_below(internal, parent, n, tree.leaves.full_mask)
                if b != s]
    if len(siblings) != 1:
        raise InvalidEdgeError(f"node above {edge} is not binary")
    d = siblings[0]
    c1, c2 = below
    return Split(c1 | d, n), Split(c2 | d, n)


def nni(tree: PhyloTree, edge: Split, choice: int,
        new_length: float | None = None) -> PhyloTree:
    """Nearest-neighbour interchange across *edge*.

    Exactly one internal split changes; the new split keeps the old edge
    length unless *new_length* is given.
    """
    if choice not in (0, 1):
        raise ValueError("choice must be 0 or 1")
    replacement = nni_alternatives(tree, edge)[choice]
    internal = dict(tree.internal_masks())
    length = internal.pop(edge.mask)
    internal[replacement.mask] = new_length if new_length is not None else length
    n = tree.leaves.n_taxa
    edges = {Split(m, n): v for m, v in internal.items()}
    edges.update({Split(m, n): v for m, v in tree.pendant_masks().items()})
    return PhyloTree(tree.leaves, edges, tree.root_length)


def spr(tree: PhyloTree, prune_edge: Split, graft_edge: Split,
        new_length: float | None = None) -> PhyloTree:
    """Subtree prune and regraft.

    The clade below *prune_edge* is cut off (the severed attachment point is
    smoothed away, concatenating edge lengths) and reattached to the middle
    of *graft_edge*, which is split in half; the new attachment edge gets
    the pruned edge's length unless *new_length* is given. The graft edge
    must survive the pruning, so it cannot lie inside the pruned clade.
    """
    n = tree.leaves.n_taxa
    s = prune_edge.mask
    g = graft_edge.mask
    internal = dict(tree.internal_masks())
    pendant = dict(tree.pendant_masks())
    if s not in internal and s not in pendant:
        raise InvalidEdgeError(f"{prune_edge} is not an edge of the tree")
    if g not in internal and g not in pendant:
        raise InvalidGraftError(f"{graft_edge} is not an edge of the tree")
    if g == s or g & s == g:
        raise InvalidGraftError("graft edge lies inside the pruned subtree")

    prune_length = internal.get(s, pendant.get(s))
    remainder_full = tree.leaves.full_mask & ~s
    new_internal: dict[int, float] = {}
    new_pendant: dict[int, float] = {}
    root_extra = [0.0]

    def put(mask: int, length: float):
        if mask == remainder_full:
            # the edge now separates only the root leaf: smooth into it
            root_extra[0] += length
            return
        target = new_internal if mask & (mask - 1) else new_pendant
        target[mask] = target.get(mask, 0.0) + length

    for m, l in list(internal.items()) + list(pendant.items()):
        if m == s:
            continue
        if m & s == m:          # inside the pruned clade: travels with it
            put(m, l)
        elif m & s:             # strict superset by compatibility: shrink
            put(m & ~s, l)
        else:
            put(m, l)

    g_rest = g & ~s if g & s else g
    host_length = new_internal.get(g_rest) if g_rest & (g_rest - 1) else new_pendant.get(g_rest)
    if host_length is None:
        raise InvalidGraftError("graft edge vanished when the subtree was pruned")
    if (g_rest | s) == tree.leaves.full_mask:
        raise InvalidGraftError("graft edge spans the whole remainder; "
                                "the move would not detach the subtree")
    half = host_length / 2.0
    if g_rest & (g_rest - 1):
        new_internal[g_rest] = half
    else:
        new_pendant[g_rest] = half
    # clades strictly above the graft point absorb the regrafted subtree
    absorbed = {}
    for m, l in new_internal.items():
        if m & g_rest == g_rest and m != g_rest:
            absorbed[m | s] = absorbed.get(m | s, 0.0) + l
        else:
            absorbed[m] = absorbed.get(m, 0.0) + l
    new_internal = absorbed
    put(g_rest | s, half)
    put(s, prune_length if new_length is None else new_length)

    edges = {Split(m, n): v for m, v in new_internal.items() if v > LENGTH_CUTOFF}
    edges.update({Split(m, n): v for m, v in new_pendant.items() if v > LENGTH_CUTOFF})
    return PhyloTree(tree.leaves, edges, tree.root_length + root_extra[0])


def random_nni(tree: PhyloTree, rng, length_dist=None) -> PhyloTree:
    """NNI at a uniformly random internal edge with a random direction."""
    internal = sorted(tree.internal_masks())
    if not internal:
        raise InvalidEdgeError("tree has no internal edges")
    n = tree.leaves.n_taxa
    edge = Split(internal[rng.randrange(len(internal))], n)
    length = length_dist(rng) if length_dist is not None else None
    return nni(tree, edge, rng.randrange(2), length)


def random_spr(tree: PhyloTree, rng, length_dist=None) -> PhyloTree:
    """SPR with the (prune, graft) pair uniform over all valid pairs."""
    n = tree.leaves.n_taxa
    edges = sorted(tree.internal_masks()) + sorted(tree.pendant_masks())
    full = tree.leaves.full_mask
    pairs = []
    for s in edges:
        for g in edges:
            if g == s or g & s == g:
                continue
            rest = g & ~s if g & s else g
            if rest == 0 or rest == s or (rest | s) == full:
                continue
            pairs.append((s, g))
    if not pairs:
        raise InvalidEdgeError("tree admits no prune-and-regraft move")
    s, g = pairs[rng.randrange(len(pairs))]
    length = length_dist(rng) if length_dist is not None else None
    return spr(tree, Split(s, n), Split(g, n), length)


# ---------------------------------------------------------------------------
# random walks in tree-space
# ---------------------------------------------------------------------------

def random_walk_step(tree: PhyloTree, step_size: float, rng) -> PhyloTree:
    """One step: jitter every internal edge length by a centred Gaussian.

    An edge pushed through zero is pruned; with probability 1/2 one of the
    compatible replacement splits from the orthants glued at that boundary
    is grafted in with the overshoot as its length, otherwise the walk rests
    on the boundary (an unresolved tree). Pendant edges are untouched.
    """
    internal = tree.internal_masks()
    kept: dict[int, float] = {}
    dropped: list[tuple[int, float]] = []
    for m in sorted(internal):
        v = internal[m] + rng.gauss(0.0, step_size)
        if v > LENGTH_CUTOFF:
            kept[m] = v
        else:
            dropped.append((m, -v))
    n = tree.leaves.n_taxa
    for m, overshoot in dropped:
        if rng.random() >= 0.5 or overshoot <= LENGTH_CUTOFF:
            continue
        try:
            alternatives = nni_alternatives(tree, Split(m, n))
        except InvalidEdgeError:
            continue
        usable = [alt.mask for alt in alternatives
                  if alt.mask not in kept
                  and all(masks_compatible(alt.mask, k) for k in kept)]
        if usable:
            kept[usable[rng.randrange(len(usable))]] = overshoot
    return PhyloTree.from_masks(tree.leaves, kept, tree.pendant_masks(),
                                tree.root_length)


def random_walk(tree: PhyloTree, steps: int, step_size: float, rng) -> PhyloTree:
    out = tree
    for _ in range(steps):
        out = random_walk_step(out, step_size, rng)
    return out


# ---------------------------------------------------------------------------
# dispersed data sets around a known surface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceDatasetSpec:
    """Recipe for a synthetic data set scattered around a known surface."""

    n_taxa: int = 10
    n_points: int = 100
    topo_op: str = "nni"
    op_count: int = 2
    gamma_shape: float = 2.0
    gamma_rate: float = 20.0
    dirichlet_alpha: tuple[float, ...] = (4.0, 4.0, 4.0)
    dispersion: str = "low"
    seed: int = 0

    def __post_init__(self):
        if self.topo_op not in ("nni", "spr"):
            raise ValueError("topo_op must be 'nni' or 'spr'")
        if self.dispersion not in ("low", "high"):
            raise ValueError("dispersion must be 'low' or 'high'")
        if min(self.n_taxa, self.n_points, self.op_count) < 1:
            raise ValueError("n_taxa, n_points and op_count must be positive")
        if self.gamma_shape <= 0 or self.gamma_rate <= 0:
            raise ValueError("gamma parameters must be positive")


def _regamma(tree: PhyloTree, rng, shape: float, rate: float) -> PhyloTree:
    internal = {m: rng.gammavariate(shape, 1.0 / rate)
                for m in sorted(tree.internal_masks())}
    pendant = {m: rng.gammavariate(shape, 1.0 / rate)
               for m in sorted(tree.pendant_masks())}
    return PhyloTree.from_masks(tree.leaves, internal, pendant,
                                rng.gammavariate(shape, 1.0 / rate))


def dispersion_step_size(dispersion: str, anchor_norm: float) -> float:
    """Walk step size for the named dispersion class: 2% or 8% of the
    anchor tree's norm."""
    return (0.02 if dispersion == "low" else 0.08) * anchor_norm


def make_surface_dataset(spec: SurfaceDatasetSpec, truth_resolution: int = 50,
                         n_jobs: int = 1, compute_truth: bool = True):
    """Generate (W, Z, truth): anchors, scattered data, and reference fit.

    The first anchor is a coalescent topology with Gamma edge lengths; the
    other two are reached from it by op_count topology rearrangements with
    rearranged edge lengths redrawn from the same Gamma. Data points are
    Dirichlet-weighted surface points perturbed by random walks whose step
    size is set by the dispersion class. The reference statistics project Z
    back onto the generating surface with the exhaustive projector; when
    ``compute_truth`` is false that step is skipped and truth is None.
    """
    rng = derived_rng(spec.seed, "surface-dataset")
    gamma = lambda r: r.gammavariate(spec.gamma_shape, 1.0 / spec.gamma_rate)

    w0 = _regamma(kingman_tree(spec.n_taxa, rng=rng), rng,
                  spec.gamma_shape, spec.gamma_rate)
    move = random_nni if spec.topo_op == "nni" else random_spr
    others = []
    for _ in range(2):
        w = w0
        for _ in range(spec.op_count):
            w = move(w, rng, gamma)
        others.append(w)
    W = VertexSet([w0, *others])

    step = dispersion_step_size(spec.dispersion, w0.norm("ignore"))
    scale = W.scale()
    mean_eps = max(1e-4 * scale, 0.1 * step)
    alpha = spec.dirichlet_alpha
    Z = []
    for i in range(spec.n_points):
        draws = [rng.gammavariate(a, 1.0) for a in alpha]
        total = sum(draws)
        p = SimplexPoint(tuple(d / total for d in draws))
        point = surface_point(W, p, eps=mean_eps)
        Z.append(random_walk(point, WALK_STEPS, step, rng))

    truth = None
    if compute_truth:
        config = ProjectorConfig(method="exhaustive", resolution=truth_resolution,
                                 n_jobs=n_jobs)
        truth = sum_sq_projected(Z, W, config)
    return W, Z, truth
