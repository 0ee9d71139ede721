"""Newick parsing and writing.

Input trees may be rooted or unrooted and may contain multifurcations; the
caller names the taxon that plays the role of the root leaf (index 0).
Zero-length internal edges are contracted on input, matching the convention
that a split of length zero is absent from the tree. One tree per line in
files; lines starting with '#' are comments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .trees import LeafSet, PhyloTree, Split, TreeError


def _num(value: float) -> str:
    """Shortest decimal that parses back to the same float, so written trees
    reload exactly."""
    return repr(float(value))


class NewickError(TreeError):
    pass


class NewickSyntaxError(NewickError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at character {position})")


class UnknownRootLabelError(NewickError):
    pass


class DuplicateTaxonError(NewickError):
    pass


class MissingLengthError(NewickError):
    pass


@dataclass
class _Node:
    label: str | None = None
    length: float | None = None
    children: list = field(default_factory=list)


_SPECIALS = set("():,;")


def _parse_structure(text: str) -> _Node:
    """Recursive-descent parse of one Newick string into a node structure."""
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def parse_label() -> str:
        nonlocal pos
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in _SPECIALS:
            pos += 1
        return text[start:pos]

    def parse_length() -> float | None:
        nonlocal pos
        skip_ws()
        if pos < n and text[pos] == ":":
            pos += 1
            skip_ws()
            start = pos
            while pos < n and not text[pos].isspace() and text[pos] not in _SPECIALS:
                pos += 1
            token = text[start:pos]
            try:
                return float(token)
            except ValueError:
                raise NewickSyntaxError(f"bad branch length {token!r}", start)
        return None

    def parse_subtree() -> _Node:
        nonlocal pos
        skip_ws()
        node = _Node()
        if pos < n and text[pos] == "(":
            pos += 1
            while True:
                node.children.append(parse_subtree())
                skip_ws()
                if pos >= n:
                    raise NewickSyntaxError("unexpected end inside '('", pos)
                if text[pos] == ",":
                    pos += 1
                    continue
                if text[pos] == ")":
                    pos += 1
                    break
                raise NewickSyntaxError(f"expected ',' or ')', got {text[pos]!r}", pos)
            skip_ws()
            # optional internal label or support value, then optional length
            if pos < n and text[pos] not in _SPECIALS:
                node.label = parse_label()
        else:
            label = parse_label()
            if not label:
                char = text[pos] if pos < n else "end of input"
                raise NewickSyntaxError(f"expected a taxon name, got {char!r}", pos)
            node.label = label
        node.length = parse_length()
        return node

    root = parse_subtree()
    skip_ws()
    if pos >= n or text[pos] != ";":
        raise NewickSyntaxError("expected ';' terminating the tree", pos)
    return root


def _leaf_labels(node: _Node, out: list[str]):
    if not node.children:
        out.append(node.label)
    for child in node.children:
        _leaf_labels(child, out)


def parse_newick(text: str, root_label: str, missing_length: str | float = "error",
                 leaf_order: dict[str, int] | None = None) -> PhyloTree:
    """Parse one Newick string into a tree rooted at the leaf *root_label*.

    ``missing_length`` controls edges written without ':length': the string
    ``'error'`` raises ``MissingLengthError``, while a number is used as the
    default length. ``leaf_order`` optionally pins the label -> index map
    (index 0 must be the root label); otherwise non-root taxa are indexed in
    the order they appear in the string.
    """
    structure = _parse_structure(text)
    labels: list[str] = []
    _leaf_labels(structure, labels)
    if len(set(labels)) != len(labels):
        seen = set()
        dup = next(x for x in labels if x in seen or seen.add(x))
        raise DuplicateTaxonError(f"taxon {dup!r} appears more than once")
    if root_label not in labels:
        raise UnknownRootLabelError(f"root label {root_label!r} is not a taxon of the tree")

    if leaf_order is not None:
        if set(leaf_order) != set(labels):
            raise NewickError("leaf map does not cover exactly the taxa of the tree")
        if leaf_order.get(root_label) != 0:
            raise NewickError(f"leaf map must assign index 0 to root label {root_label!r}")
        ordered = sorted(leaf_order, key=leaf_order.get)
        if sorted(leaf_order.values()) != list(range(len(labels))):
            raise NewickError("leaf map indices must be 0..N without gaps")
    else:
        ordered = [root_label] + [x for x in labels if x != root_label]
    leaves = LeafSet(tuple(ordered))
    index = {label: i for i, label in enumerate(ordered)}
    full = leaves.full_mask

    def edge_length(node: _Node) -> float:
        if node.length is None:
            if missing_length == "error":
                raise MissingLengthError(
                    f"edge above {node.label or 'an internal node'} has no branch length")
            return float(missing_length)
        return node.length

    internal: dict[int, float] = {}
    pendant: dict[int, float] = {}
    root_length = 0.0

    def add_side(mask: int, length: float, node: _Node):
        nonlocal root_length
        side = mask if not mask & 1 else full & ~mask
        count = bin(side).count("1")
        if length < 0.0:
            raise NewickError(f"negative branch length {length} on split of {node.label or '()'}")
        if side == full:
            root_length += length
            return
        if count == 1:
            if length > 0.0:
                pendant[side] = pendant.get(side, 0.0) + length
        else:
            # zero-length internal edges are contracted (unresolved tree)
            if length > 0.0:
                internal[side] = internal.get(side, 0.0) + length

    def walk(node: _Node) -> int:
        if not node.children:
            return 1 << index[node.label]
        below = 0
        for child in node.children:
            cmask = walk(child)
            add_side(cmask, edge_length(child), child)
            below |= cmask
        return below

    if not structure.children:
        raise NewickError("a single taxon is not a tree")
    # the top-level node has no edge above it; any length there is ignored
    walk(structure)

    return PhyloTree(leaves, {Split(m, leaves.n_taxa): v for m, v in {**internal, **pendant}.items()},
                     root_length=root_length)


def write_newick(tree: PhyloTree) -> str:
    """Serialize a tree; ``parse_newick`` of the output recovers the tree.

    The root leaf is written as the first child of the outermost node and
    branch lengths carry 12 significant digits.
    """
    leaves = tree.leaves
    internal = tree.internal_masks()
    pendant = tree.pendant_masks()
    # nesting forest: parent of a split is the smallest strict superset
    order = sorted(internal, key=lambda m: bin(m).count("1"))
    children: dict[int | None, list[int]] = {None: []}
    for i, mask in enumerate(order):
        parent = None
        for other in order[i + 1:]:
            if mask & other == mask:
                parent = other
                break
        children.setdefault(parent, []).append(mask)
        children.setdefault(mask, [])

    placed: dict[int | None, list[int]] = {}
    for i in range(1, leaves.n_leaves):
        bit = 1 << i
        host = None
        for mask in order:  # popcount order: first hit is the smallest clade
            if mask & bit:
                host = mask
                break
        placed.setdefault(host, []).append(i)

    def render(mask: int | None) -> str:
        parts = []
        for i in sorted(placed.get(mask, [])):
            parts.append(f"{leaves.labels[i]}:{_num(pendant.get(1 << i, 0.0))}")
        for sub in sorted(children.get(mask, ())):
            parts.append(f"({render(sub)}):{_num(internal[sub])}")
        return ",".join(parts)

    body = render(None)
    return f"({leaves.labels[0]}:{_num(tree.root_length)},{body});"


def read_newick_file(path, root_label: str, missing_length: str | float = "error",
                     leaf_order: dict[str, int] | None = None) -> list[PhyloTree]:
    """Read one tree per line, skipping blanks and '#' comments.

    All trees must share the same taxa; the first tree fixes the index order
    unless *leaf_order* is given.
    """
    trees: list[PhyloTree] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                tree = parse_newick(line, root_label, missing_length, leaf_order)
            except TreeError as exc:
                raise NewickError(f"{path}:{lineno}: {exc}") from exc
            if trees and tree.leaves.labels != trees[0].leaves.labels:
                if set(tree.leaves.labels) != set(trees[0].leaves.labels):
                    raise NewickError(
                        f"{path}:{lineno}: taxa differ from earlier trees in the file")
                remap = {lab: i for i, lab in enumerate(trees[0].leaves.labels)}
                tree = parse_newick(line, root_label, missing_length, remap)
            trees.append(tree)
    if not trees:
        raise NewickError(f"{path}: no trees found")
    return trees


def write_newick_file(path, trees) -> None:
    with open(path, "w") as fh:
        for tree in trees:
            fh.write(write_newick(tree) + "\n")


def read_leaf_map(path) -> dict[str, int]:
    """Read the optional JSON sidecar mapping labels to leaf indices."""
    with open(path) as fh:
        data = json.load(fh)
    return {str(k): int(v) for k, v in data.items()}
