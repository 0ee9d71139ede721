"""Core data model: leaf sets, splits, and phylogenetic trees.

A tree on leaves 0..N is encoded by the bipartitions (splits) its edges
induce on the leaf set. Leaf 0 is the designated root leaf; each split is
stored canonically as the subset of {1..N} on the side away from the root,
packed into an integer bitmask so that compatibility is a few bit operations.
A tree is then a map from splits to strictly positive branch lengths, which
is exactly a point of tree-space: length zero means the split is absent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from ._util import TREE_ATOL


class TreeError(ValueError):
    """Base class for tree construction and validation errors."""


class NonPositiveLengthError(TreeError):
    pass


class IncompatibleSplitsError(TreeError):
    def __init__(self, first, second):
        self.pair = (first, second)
        super().__init__(f"splits {first} and {second} cannot coexist in one tree")


class DuplicateSplitError(TreeError):
    pass


class LeafSetMismatchError(TreeError):
    pass


class NotFullyResolvedError(TreeError):
    pass


@dataclass(frozen=True)
class LeafSet:
    """An ordered collection of leaf names; index 0 is the root leaf.

    With N+1 leaves the non-root taxa are indexed 1..N, and splits are
    subsets of those indices.
    """

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise TreeError("a leaf set needs the root plus at least one taxon")
        if len(set(self.labels)) != len(self.labels):
            raise TreeError("leaf labels must be unique")
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @classmethod
    def numbered(cls, n_taxa: int) -> "LeafSet":
        """Leaf set with labels '0'..'n_taxa', where '0' is the root."""
        return cls(tuple(str(i) for i in range(n_taxa + 1)))

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def n_taxa(self) -> int:
        """Number of non-root taxa N."""
        return len(self.labels) - 1

    @property
    def full_mask(self) -> int:
        """Bitmask of all non-root indices 1..N."""
        return ((1 << self.n_leaves) - 1) & ~1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown leaf label {label!r}") from None

    def split_of(self, indices: Iterable[int]) -> "Split":
        """Split whose non-root side is the given leaf indices."""
        mask = 0
        for i in indices:
            mask |= 1 << i
        return Split(mask, self.n_taxa)


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True, order=True)
class Split:
    """A bipartition of the leaf set, stored as the side away from the root.

    ``mask`` has bit i set when leaf i is on the non-root side; bit 0 is
    never set and the side is a nonempty proper subset of {1..N}.
    """

    mask: int
    n_taxa: int

    def __post_init__(self):
        full = ((1 << (self.n_taxa + 1)) - 1) & ~1
        if self.mask & 1:
            raise TreeError("split side must not contain the root leaf 0")
        if self.mask == 0:
            raise TreeError("split side must be nonempty")
        if self.mask & ~full:
            raise TreeError("split side contains out-of-range leaf indices")
        if self.mask == full:
            raise TreeError("split side must be a proper subset of the taxa")

    @property
    def side(self) -> frozenset[int]:
        return frozenset(i for i in range(1, self.n_taxa + 1) if self.mask >> i & 1)

    @property
    def is_pendant(self) -> bool:
        return _popcount(self.mask) == 1

    @property
    def is_internal(self) -> bool:
        return not self.is_pendant

    def compatible_with(self, other: "Split") -> bool:
        return masks_compatible(self.mask, other.mask)

    def __str__(self):
        return "{%s}" % ",".join(str(i) for i in sorted(self.side))


def masks_compatible(a: int, b: int) -> bool:
    """Compatibility test on raw split masks: disjoint or nested sides.

    Both complements contain the root, so of the four side intersections only
    these three can be empty.
    """
    ab = a & b
    return ab == 0 or ab == a or ab == b


def compatible(a: Split, b: Split, leaves: LeafSet | None = None) -> bool:
    """True when the two splits can coexist in a single tree."""
    ab = a.mask & b.mask
    return ab == 0 or ab == a.mask or ab == b.mask


@dataclass(frozen=True)
class TopologyId:
    """Canonical identifier of a tree topology: its sorted internal splits."""

    masks: tuple[int, ...]
    n_taxa: int

    @property
    def splits(self) -> tuple[Split, ...]:
        return tuple(Split(m, self.n_taxa) for m in self.masks)

    def __str__(self):
        return "|".join(str(s) for s in self.splits) or "*"


class PhyloTree:
    """A phylogenetic tree: pairwise compatible splits with positive lengths.

    Immutable after construction. Internal splits, pendant splits (one leaf
    on the far side) and the root leaf's own pendant edge are stored
    separately; a split that is absent simply has length zero.
    """

    __slots__ = ("leaves", "_internal", "_pendant", "root_length")

    def __init__(self, leaves: LeafSet, edges: Mapping[Split, float],
                 root_length: float = 0.0, validate: bool = True):
        internal: dict[int, float] = {}
        pendant: dict[int, float] = {}
        for split, length in edges.items():
            if isinstance(split, Split):
                if split.n_taxa != leaves.n_taxa:
                    raise LeafSetMismatchError(
                        f"split {split} is over {split.n_taxa} taxa, tree has {leaves.n_taxa}")
                mask = split.mask
            else:
                mask = int(split)
            length = float(length)
            if validate and length <= 0.0:
                raise NonPositiveLengthError(
                    f"split {Split(mask, leaves.n_taxa)} has non-positive length {length}")
            target = pendant if _popcount(mask) == 1 else internal
            if mask in target:
                raise DuplicateSplitError(f"split {Split(mask, leaves.n_taxa)} given twice")
            target[mask] = length
        if validate:
            masks = sorted(internal)
            for i, a in enumerate(masks):
                for b in masks[i + 1:]:
                    if not masks_compatible(a, b):
                        raise IncompatibleSplitsError(Split(a, leaves.n_taxa),
                                                      Split(b, leaves.n_taxa))
            if len(internal) > max(0, leaves.n_taxa - 2):
                raise TreeError(
                    f"{len(internal)} internal splits exceed the maximum "
                    f"{leaves.n_taxa - 2} for {leaves.n_taxa} taxa")
        if root_length < 0.0:
            raise NonPositiveLengthError("root pendant length must be >= 0")
        object.__setattr__(self, "leaves", leaves)
        object.__setattr__(self, "_internal", internal)
        object.__setattr__(self, "_pendant", pendant)
        object.__setattr__(self, "root_length", float(root_length))

    def __setattr__(self, name, value):
        raise AttributeError("PhyloTree is immutable")

    def __getstate__(self):
        return (self.leaves, self._internal, self._pendant, self.root_length)

    def __setstate__(self, state):
        for name, value in zip(self.__slots__, state):
            object.__setattr__(self, name, value)

    @classmethod
    def from_masks(cls, leaves: LeafSet, internal: Mapping[int, float],
                   pendant: Mapping[int, float] | None = None,
                   root_length: float = 0.0) -> "PhyloTree":
        """Trusted fast path used by geodesic interpolation; skips validation."""
        tree = cls.__new__(cls)
        object.__setattr__(tree, "leaves", leaves)
        object.__setattr__(tree, "_internal", dict(internal))
        object.__setattr__(tree, "_pendant", dict(pendant or {}))
        object.__setattr__(tree, "root_length", float(root_length))
        return tree

    # -- accessors ---------------------------------------------------------

    @property
    def edges(self) -> dict[Split, float]:
        """All stored splits (internal and pendant) with their lengths."""
        n = self.leaves.n_taxa
        out = {Split(m, n): v for m, v in self._internal.items()}
        out.update({Split(m, n): v for m, v in self._pendant.items()})
        return out

    def internal_splits(self) -> dict[Split, float]:
        n = self.leaves.n_taxa
        return {Split(m, n): v for m, v in self._internal.items()}

    def internal_masks(self) -> dict[int, float]:
        """Raw mask -> length map of internal splits (do not mutate)."""
        return self._internal

    def pendant_masks(self) -> dict[int, float]:
        return self._pendant

    def length_of(self, split: Split) -> float:
        mask = split.mask
        return self._internal.get(mask) or self._pendant.get(mask, 0.0)

    @property
    def n_internal(self) -> int:
        return len(self._internal)

    @property
    def is_fully_resolved(self) -> bool:
        return len(self._internal) == self.leaves.n_taxa - 2

    def topology(self) -> TopologyId:
        return TopologyId(tuple(sorted(self._internal)), self.leaves.n_taxa)

    def norm(self, pendant_mode: str = "ignore") -> float:
        """Euclidean norm of the edge-length vector.

        ``pendant_mode='ignore'`` sums internal splits only; ``'include'``
        adds pendant edges and the root pendant.
        """
        total = sum(v * v for v in self._internal.values())
        if pendant_mode == "include":
            total += sum(v * v for v in self._pendant.values())
            total += self.root_length * self.root_length
        elif pendant_mode != "ignore":
            raise ValueError("pendant_mode must be 'include' or 'ignore'")
        return total ** 0.5

    def total_internal_length(self) -> float:
        return sum(self._internal.values())

    def reindexed(self, leaves: LeafSet) -> "PhyloTree":
        """The same tree expressed over *leaves*, which must hold the same
        labels, possibly in a different index order."""
        if leaves.labels == self.leaves.labels:
            return self
        if set(leaves.labels) != set(self.leaves.labels):
            raise LeafSetMismatchError("cannot reindex onto a different taxon set")
        if leaves.labels[0] != self.leaves.labels[0]:
            raise LeafSetMismatchError("reindexing cannot change the root leaf")
        bit_map = [1 << leaves.index(lab) for lab in self.leaves.labels]

        def remap(mask: int) -> int:
            out = 0
            i = 0
            while mask:
                if mask & 1:
                    out |= bit_map[i]
                mask >>= 1
                i += 1
            return out

        internal = {remap(m): v for m, v in self._internal.items()}
        pendant = {remap(m): v for m, v in self._pendant.items()}
        return PhyloTree.from_masks(leaves, internal, pendant, self.root_length)

    # -- comparison --------------------------------------------------------

    def approx_equal(self, other: "PhyloTree", atol: float = TREE_ATOL) -> bool:
        if self.leaves.labels != other.leaves.labels:
            if set(self.leaves.labels) != set(other.leaves.labels) or \
                    self.leaves.labels[0] != other.leaves.labels[0]:
                return False
            other = other.reindexed(self.leaves)
        if abs(self.root_length - other.root_length) > atol:
            return False
        for mine, theirs in ((self._internal, other._internal),
                             (self._pendant, other._pendant)):
            for mask in mine.keys() | theirs.keys():
                if abs(mine.get(mask, 0.0) - theirs.get(mask, 0.0)) > atol:
                    return False
        return True

    def __eq__(self, other):
        if not isinstance(other, PhyloTree):
            return NotImplemented
        return self.approx_equal(other)

    __hash__ = None  # tolerant equality is incompatible with hashing

    def __repr__(self):
        n = self.leaves.n_taxa
        parts = ", ".join(f"{Split(m, n)}:{v:g}" for m, v in sorted(self._internal.items()))
        return f"PhyloTree({n + 1} leaves; {parts or 'star'})"


def validate_tree(leaves: LeafSet, edges: Mapping[Split, float],
                  root_length: float = 0.0) -> PhyloTree:
    """Build a tree after checking positivity, uniqueness and compatibility.

    Raises ``NonPositiveLengthError``, ``DuplicateSplitError`` or
    ``IncompatibleSplitsError``.
    """
    return PhyloTree(leaves, edges, root_length, validate=True)


def all_splits(n_taxa: int, internal_only: bool = False) -> list[Split]:
    """Every representable split over {1..n_taxa} (root pendant excluded)."""
    out = []
    full = ((1 << (n_taxa + 1)) - 1) & ~1
    for mask in range(2, full + 1, 2):
        if mask == full:
            continue
        if internal_only and _popcount(mask) < 2:
            continue
        out.append(Split(mask, n_taxa))
    return out
