"""Geodesics between trees: support decomposition, length, interpolation.

The geodesic between trees x and y is characterized by its *support*: an
ordered sequence of leg pairs (A1,B1),...,(Al,Bl) of splits, where the Aj
(from x) shrink to zero in order as the path is traversed and the Bj (from
y) grow in their place, plus the set C of splits compatible with everything
on both sides, which are carried across the whole path and interpolate
linearly. A valid support has nondecreasing norm ratios ||Aj||/||Bj|| and
every split of Bj compatible with the later-vanishing A(j+1..l). The
geodesic is the valid support on which no leg can be refined: refinement is
decided by a minimum-weight vertex cover on the leg's bipartite
incompatibility graph (computed by max-flow), with vertex weights the
normalized squared edge lengths; a cover of weight < 1 certifies a strictly
shorter path and splits the leg in two.

Squared length of the geodesic:

    d(x,y)^2 = sum_j (||Aj||_x + ||Bj||_y)^2 + sum_(e in C) (|e|_x - |e|_y)^2

Pendant edges are compatible with everything, hence always common; they and
the root pendant enter the distance only in pendant_mode='include'.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Iterator

from ._util import LENGTH_CUTOFF
from .trees import (LeafSet, LeafSetMismatchError, NotFullyResolvedError,
                    PhyloTree, Split, TreeError, masks_compatible)

# A vertex cover of weight below this refines a leg; ties (weight exactly 1)
# leave the leg whole, as either decomposition gives the same length.
COVER_ACCEPT = 1.0 - 1e-12
_RESIDUAL_EPS = 1e-15


class ParameterOutOfRangeError(TreeError):
    pass


# ---------------------------------------------------------------------------
# support refinement
# ---------------------------------------------------------------------------

def _norm_sq(items) -> float:
    return sum(l * l for _, l in items)


def _min_cover_masks(wp, wq, adj):
    """Exact min-weight vertex cover of a bipartite graph with tiny sides.

    ``adj[i]`` is the bitmask of Q-neighbours of P vertex i. Enumerates the
    P-side cover subsets; the Q part is then forced to the neighbours of the
    uncovered P vertices. Returns (weight, p_cover_mask, q_cover_mask).
    Positive weights make the argmin automatically minimal, so each cover
    vertex keeps an edge whose other end is uncovered.
    """
    np_ = len(wp)
    size = 1 << np_
    full = size - 1
    needed = [0] * size
    for rest in range(1, size):
        low = rest & -rest
        needed[rest] = needed[rest ^ low] | adj[low.bit_length() - 1]
    qweight = [0.0] * (1 << len(wq))
    for m in range(1, 1 << len(wq)):
        low = m & -m
        qweight[m] = qweight[m ^ low] + wq[low.bit_length() - 1]
    wsum = [0.0] * size
    best_weight = 2.0
    best_s = 0
    for s in range(size):
        if s:
            low = s & -s
            wsum[s] = wsum[s ^ low] + wp[low.bit_length() - 1]
        w = wsum[s] + qweight[needed[full ^ s]]
        if w < best_weight:
            best_weight = w
            best_s = s
    return best_weight, best_s, needed[full ^ best_s]


def _split_fully(a_items, b_items):
    """Recursively refine one leg until no vertex cover of weight < 1 exists.

    Cover weights are the squared split lengths normalized by the side's
    squared norm; a cover lighter than 1 certifies that splitting the leg at
    the cover shortens the path.
    """
    na = len(a_items)
    nb = len(b_items)
    if na == 1 or nb == 1:
        # a refinement needs both parts of both sides nonempty
        return [(a_items, b_items)]

    # adjacency as a B-bitmask per A vertex
    adj = []
    any_edges = 0
    for am, _ in a_items:
        mask = 0
        bit = 1
        for bm, _ in b_items:
            ab = am & bm
            if ab and ab != am and ab != bm:
                mask |= bit
            bit <<= 1
        adj.append(mask)
        any_edges |= mask
    if not any_edges:
        return [(a_items, b_items)]

    na2 = _norm_sq(a_items)
    nb2 = _norm_sq(b_items)
    wa = [l * l / na2 for _, l in a_items]
    wb = [l * l / nb2 for _, l in b_items]

    if na <= nb:
        weight, a_cover, b_cover = _min_cover_masks(wa, wb, adj)
    else:
        adj_b = [0] * nb
        for i, mask in enumerate(adj):
            bit = 1 << i
            j = 0
            while mask:
                if mask & 1:
                    adj_b[j] |= bit
                mask >>= 1
                j += 1
        weight, b_cover, a_cover = _min_cover_masks(wb, wa, adj_b)

    if weight >= COVER_ACCEPT:
        return [(a_items, b_items)]
    c1 = [it for i, it in enumerate(a_items) if a_cover >> i & 1]
    c2 = [it for i, it in enumerate(a_items) if not a_cover >> i & 1]
    d2 = [it for j, it in enumerate(b_items) if b_cover >> j & 1]
    d1 = [it for j, it in enumerate(b_items) if not b_cover >> j & 1]
    if not c1 or not c2 or not d1 or not d2:
        return [(a_items, b_items)]
    return _split_fully(c1, d1) + _split_fully(c2, d2)


def _refine(a_all, b_all):
    """Refine the single-leg cone decomposition into the geodesic support.

    Alternates full splitting with merging of adjacent legs whose norm
    ratios come out of order. Both operations strictly shorten the path and
    supports form a finite set, so the loop terminates, on the unique
    support that admits neither operation.
    """
    legs = _split_fully(list(a_all), list(b_all))
    while True:
        merged_any = False
        out = [legs[0]]
        for a, b in legs[1:]:
            pa, pb = out[-1]
            if _norm_sq(pa) * _norm_sq(b) > _norm_sq(a) * _norm_sq(pb) * (1.0 + 2e-12):
                out[-1] = (pa + a, pb + b)
                merged_any = True
            else:
                out.append((a, b))
        if not merged_any:
            return legs
        legs = []
        for a, b in out:
            legs.extend(_split_fully(list(a), list(b)))


def _decompose(ex: dict, ey: dict):
    """Split the internal edges of two trees into geodesic legs and commons.

    Returns (legs, common): legs is a list of
    (a_items, b_items, a_norm, b_norm) ordered by nondecreasing ratio,
    common a list of (mask, length_in_x, length_in_y) covering every split
    compatible with all splits of both trees.
    """
    common = []
    ax = []
    by = []
    ykeys = list(ey)
    xkeys = list(ex)
    for m, l in ex.items():
        if m in ey:
            common.append((m, l, ey[m]))
            continue
        for k in ykeys:
            km = k & m
            if km and km != k and km != m:
                ax.append((m, l))
                break
        else:
            common.append((m, l, 0.0))
    for m, l in ey.items():
        if m in ex:
            continue
        for k in xkeys:
            km = k & m
            if km and km != k and km != m:
                by.append((m, l))
                break
        else:
            common.append((m, 0.0, l))
    if not ax and not by:
        return [], common
    assert ax and by, "one-sided incompatibility is impossible"
    legs = []
    for a, b in _refine(ax, by):
        legs.append((tuple(a), tuple(b), sqrt(_norm_sq(a)), sqrt(_norm_sq(b))))
    return legs, common


def masks_distance(ex: dict, ey: dict) -> float:
    """Distance between two trees given as internal mask -> length dicts.

    The allocation-light core behind the iterative mean and projection
    loops; pendant contributions are the caller's business.
    """
    legs, common = _decompose(ex, ey)
    total = sum((na + nb) ** 2 for _, _, na, nb in legs)
    total += sum((lx - ly) ** 2 for _, lx, ly in common)
    return sqrt(total)


def masks_step(ex: dict, ey: dict, t: float) -> tuple[dict, float]:
    """One proximal step on raw mask dicts.

    Returns the internal splits of the point a proportion t along the
    geodesic from ex to ey, together with the geodesic length.
    """
    legs, common = _decompose(ex, ey)
    total = sum((na + nb) ** 2 for _, _, na, nb in legs)
    total += sum((lx - ly) ** 2 for _, lx, ly in common)
    s = 1.0 - t
    out: dict = {}
    for m, lx, ly in common:
        v = s * lx + t * ly
        if v > LENGTH_CUTOFF:
            out[m] = v
    for a_items, b_items, na, nb in legs:
        boundary = na / (na + nb)
        if t < boundary:
            scale = (s * na - t * nb) / na
            for m, l in a_items:
                v = l * scale
                if v > LENGTH_CUTOFF:
                    out[m] = v
        elif t > boundary:
            scale = (t * nb - s * na) / nb
            for m, l in b_items:
                v = l * scale
                if v > LENGTH_CUTOFF:
                    out[m] = v
    return out, sqrt(total)


# ---------------------------------------------------------------------------
# public objects
# ---------------------------------------------------------------------------

class GeodesicSupport:
    """The ordered (A, B, C) decomposition of a geodesic.

    ``legs[j]`` holds the splits of the source that vanish on leg j paired
    with the splits of the target that appear there; ``common`` holds the
    carried splits with their (source, target) length pair. Pendant edges
    are tracked separately and count as common only in
    pendant_mode='include'.
    """

    __slots__ = ("leaves", "pendant_mode", "legs", "common", "pendants", "root_pair")

    def __init__(self, leaves, pendant_mode, legs, common, pendants, root_pair):
        self.leaves = leaves
        self.pendant_mode = pendant_mode
        self.legs = legs
        self.common = common
        self.pendants = pendants
        self.root_pair = root_pair

    @property
    def n_legs(self) -> int:
        return len(self.legs)

    @property
    def a_sets(self) -> tuple[frozenset[Split], ...]:
        n = self.leaves.n_taxa
        return tuple(frozenset(Split(m, n) for m, _ in a) for a, _, _, _ in self.legs)

    @property
    def b_sets(self) -> tuple[frozenset[Split], ...]:
        n = self.leaves.n_taxa
        return tuple(frozenset(Split(m, n) for m, _ in b) for _, b, _, _ in self.legs)

    @property
    def common_splits(self) -> dict[Split, tuple[float, float]]:
        n = self.leaves.n_taxa
        out = {Split(m, n): (lx, ly) for m, lx, ly in self.common}
        if self.pendant_mode == "include":
            out.update({Split(m, n): (lx, ly) for m, lx, ly in self.pendants})
        return out

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(na / nb for _, _, na, nb in self.legs)

    def length_sq(self) -> float:
        total = sum((na + nb) ** 2 for _, _, na, nb in self.legs)
        total += sum((lx - ly) ** 2 for _, lx, ly in self.common)
        if self.pendant_mode == "include":
            total += sum((lx - ly) ** 2 for _, lx, ly in self.pendants)
            rx, ry = self.root_pair
            total += (rx - ry) ** 2
        return total

    def signature(self):
        """Hashable token equal for two tree pairs iff supports coincide."""
        a = tuple(tuple(sorted(m for m, _ in leg[0])) for leg in self.legs)
        b = tuple(tuple(sorted(m for m, _ in leg[1])) for leg in self.legs)
        c = tuple(sorted(m for m, _, _ in self.common))
        return (a, b, c)

    def validate(self) -> None:
        """Check the structural invariants; used by the test-suite."""
        assert len(self.legs) == 0 or all(a and b for a, b, _, _ in self.legs)
        ratios = self.ratios
        for r1, r2 in zip(ratios, ratios[1:]):
            assert r1 <= r2 * (1 + 1e-9), f"ratios out of order: {ratios}"
        for j, (_, b, _, _) in enumerate(self.legs):
            earlier = [m for a, _, _, _ in self.legs[:j + 1] for m, _ in a]
            later = [m for a, _, _, _ in self.legs[j + 1:] for m, _ in a]
            for bm, _ in b:
                assert all(masks_compatible(bm, am) for am in later)
                assert any(not masks_compatible(bm, am) for am in earlier)
                assert all(masks_compatible(bm, cm) for cm, _, _ in self.common)


@dataclass(frozen=True)
class Geodesic:
    """A geodesic segment with its support and length."""

    source: PhyloTree
    target: PhyloTree
    support: GeodesicSupport
    length: float

    @property
    def pendant_mode(self) -> str:
        return self.support.pendant_mode


def _check_same_leaves(x: PhyloTree, y: PhyloTree) -> None:
    if x.leaves.labels != y.leaves.labels:
        raise LeafSetMismatchError("trees are over different leaf sets")


def compute_support(x: PhyloTree, y: PhyloTree,
                    pendant_mode: str = "ignore") -> GeodesicSupport:
    """Support decomposition of the geodesic from x to y."""
    _check_same_leaves(x, y)
    if pendant_mode not in ("ignore", "include"):
        raise ValueError("pendant_mode must be 'include' or 'ignore'")
    legs, common = _decompose(x.internal_masks(), y.internal_masks())
    px, py = x.pendant_masks(), y.pendant_masks()
    pendants = tuple((m, px.get(m, 0.0), py.get(m, 0.0)) for m in sorted(px.keys() | py.keys()))
    return GeodesicSupport(x.leaves, pendant_mode, tuple(legs), tuple(common),
                           pendants, (x.root_length, y.root_length))


def geodesic(x: PhyloTree, y: PhyloTree, pendant_mode: str = "ignore") -> Geodesic:
    support = compute_support(x, y, pendant_mode)
    return Geodesic(x, y, support, sqrt(support.length_sq()))


def distance(x: PhyloTree, y: PhyloTree, pendant_mode: str = "ignore") -> float:
    """Geodesic (tree-space) distance between two trees over one leaf set."""
    _check_same_leaves(x, y)
    legs, common = _decompose(x.internal_masks(), y.internal_masks())
    total = sum((na + nb) ** 2 for _, _, na, nb in legs)
    total += sum((lx - ly) ** 2 for _, lx, ly in common)
    if pendant_mode == "include":
        px, py = x.pendant_masks(), y.pendant_masks()
        for m in px.keys() | py.keys():
            total += (px.get(m, 0.0) - py.get(m, 0.0)) ** 2
        total += (x.root_length - y.root_length) ** 2
    elif pendant_mode != "ignore":
        raise ValueError("pendant_mode must be 'include' or 'ignore'")
    return sqrt(total)


def point_on_geodesic(g: Geodesic, t: float) -> PhyloTree:
    """The tree a proportion *t* of the way along the geodesic.

    Common splits interpolate linearly; the splits of leg j are present
    before (source side) or after (target side) the leg boundary at
    t_j = ||Aj||/(||Aj|| + ||Bj||). Pendant edges and the root pendant
    interpolate linearly regardless of pendant mode. Splits thinner than
    1e-12 at the evaluation point are omitted.
    """
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRangeError(f"t={t} outside [0, 1]")
    if t == 0.0:
        return g.source
    if t == 1.0:
        return g.target
    support = g.support
    internal: dict[int, float] = {}
    for m, lx, ly in support.common:
        v = (1.0 - t) * lx + t * ly
        if v > LENGTH_CUTOFF:
            internal[m] = v
    s = 1.0 - t
    for a_items, b_items, na, nb in support.legs:
        boundary = na / (na + nb)
        if t < boundary:
            scale = (s * na - t * nb) / na
            for m, l in a_items:
                v = l * scale
                if v > LENGTH_CUTOFF:
                    internal[m] = v
        elif t > boundary:
            scale = (t * nb - s * na) / nb
            for m, l in b_items:
                v = l * scale
                if v > LENGTH_CUTOFF:
                    internal[m] = v
    pendant: dict[int, float] = {}
    for m, lx, ly in support.pendants:
        v = s * lx + t * ly
        if v > LENGTH_CUTOFF:
            pendant[m] = v
    rx, ry = support.root_pair
    return PhyloTree.from_masks(g.source.leaves, internal, pendant, s * rx + t * ry)


def interpolate(x: PhyloTree, y: PhyloTree, t: float,
                pendant_mode: str = "ignore") -> PhyloTree:
    """Convenience: the point a proportion t along the geodesic from x to y."""
    return point_on_geodesic(geodesic(x, y, pendant_mode), t)


def is_simple(g: Geodesic) -> bool:
    """True when at most one split vanishes at a time along the geodesic.

    Defined for fully resolved endpoints only.
    """
    if not (g.source.is_fully_resolved and g.target.is_fully_resolved):
        raise NotFullyResolvedError("simplicity is defined for fully resolved endpoints")
    return all(len(a) == 1 and len(b) == 1 for a, b, _, _ in g.support.legs)


def support_signature(x: PhyloTree, y: PhyloTree, pendant_mode: str = "ignore"):
    """Hashable token identifying the support of the geodesic from x to y.

    Two target points give equal tokens exactly when the geodesics from x
    share the ordered A-list, B-list and common set, which is what defines a
    support region.
    """
    return compute_support(x, y, pendant_mode).signature()
