"""Shared fixtures: the three-orthant reference configuration and random trees.

The reference configuration lives in the space of trees on six leaves and
spans three orthants glued around the codimension-2 face where only the
split {2,3,4,5} survives. With coordinates

    xi1 = length of {2,3}   (negative axis: {3,4,5}),
    xi2 = length of {4,5}   (negative axis: {2,3,4}),
    xi3 = length of {2,3,4,5},

the three anchors sit at (1,1,2), (-2,1,1) and (1,-2,1). Distances, the
equal-weight mean (0,0,4/3) and the surface of weighted means all have
closed forms here, which the tests use as ground truth.
"""

import random

import pytest

from treespace.trees import LeafSet, PhyloTree, masks_compatible

LEAVES6 = LeafSet.numbered(5)


def split6(*indices):
    return LEAVES6.split_of(indices)


def tree_from_xi(x1, x2, x3, pendants=False):
    """Tree at coordinates (x1, x2, x3) of the reference configuration."""
    splits = {}
    if x1 > 0:
        splits[split6(2, 3)] = x1
    elif x1 < 0:
        splits[split6(3, 4, 5)] = -x1
    if x2 > 0:
        splits[split6(4, 5)] = x2
    elif x2 < 0:
        splits[split6(2, 3, 4)] = -x2
    if x3 != 0:
        splits[split6(2, 3, 4, 5)] = x3
    if pendants:
        for i in range(1, 6):
            splits[LEAVES6.split_of([i])] = 1.0
    return PhyloTree(LEAVES6, splits)


def xi_of(tree):
    """Coordinates of a tree of the reference configuration."""
    masks = tree.internal_masks()

    def length(*indices):
        mask = 0
        for i in indices:
            mask |= 1 << i
        return masks.get(mask, 0.0)

    return (length(2, 3) - length(3, 4, 5),
            length(4, 5) - length(2, 3, 4),
            length(2, 3, 4, 5))


@pytest.fixture(scope="session")
def reference_vertices():
    """The anchors at (1,1,2), (-2,1,1), (1,-2,1)."""
    return (tree_from_xi(1, 1, 2), tree_from_xi(-2, 1, 1), tree_from_xi(1, -2, 1))


def random_resolved_tree(rng: random.Random, n_taxa: int,
                         length_range=(0.05, 2.0)) -> PhyloTree:
    """Uniform-ish random resolved tree built by greedy compatible selection."""
    leaves = LeafSet.numbered(n_taxa)
    full = leaves.full_mask
    candidates = [m for m in range(2, full, 2) if m & (m - 1)]
    rng.shuffle(candidates)
    chosen = []
    for mask in candidates:
        if len(chosen) == n_taxa - 2:
            break
        if all(masks_compatible(mask, c) for c in chosen):
            chosen.append(mask)
    internal = {m: rng.uniform(*length_range) for m in chosen}
    return PhyloTree.from_masks(leaves, internal, {}, 0.0)


def random_tree(rng: random.Random, n_taxa: int, p_unresolved=0.3,
                length_range=(0.05, 2.0)) -> PhyloTree:
    """Random tree, sometimes unresolved by dropping splits."""
    tree = random_resolved_tree(rng, n_taxa, length_range)
    internal = dict(tree.internal_masks())
    while internal and rng.random() < p_unresolved:
        internal.pop(rng.choice(sorted(internal)))
    return PhyloTree.from_masks(tree.leaves, internal, {}, 0.0)
