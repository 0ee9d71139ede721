"""Independent oracles the tests check the library against.

These deliberately share no code with the library internals: the geodesic
oracle enumerates every ordered support decomposition satisfying the path
validity constraints and minimizes the length formula over them, which is
tractable for five or fewer non-root taxa.
"""

import itertools
from math import sqrt

from treespace.trees import masks_compatible


def ordered_partitions(items, n_blocks):
    """All partitions of *items* into n_blocks ordered nonempty blocks."""
    if n_blocks == 1:
        yield [list(items)]
        return
    for assignment in itertools.product(range(n_blocks), repeat=len(items)):
        if set(assignment) != set(range(n_blocks)):
            continue
        blocks = [[] for _ in range(n_blocks)]
        for item, b in zip(items, assignment):
            blocks[b].append(item)
        yield blocks


def brute_force_distance(x, y, pendant_mode="ignore") -> float:
    """Geodesic distance by exhaustive search over valid supports.

    A support is valid when each target-side block is compatible with every
    later source-side block and the block norm ratios are nondecreasing; its
    length is sum of (block norm sums)^2 plus the common-edge differences.
    """
    ex = dict(x.internal_masks())
    ey = dict(y.internal_masks())
    common = []
    ax, by = [], []
    for m, l in ex.items():
        if m in ey:
            common.append((l, ey[m]))
        elif all(masks_compatible(m, k) for k in ey):
            common.append((l, 0.0))
        else:
            ax.append((m, l))
    for m, l in ey.items():
        if m in ex:
            continue
        if all(masks_compatible(m, k) for k in ex):
            common.append((0.0, l))
        else:
            by.append((m, l))
    base = sum((a - b) ** 2 for a, b in common)
    if pendant_mode == "include":
        px, py = x.pendant_masks(), y.pendant_masks()
        for m in px.keys() | py.keys():
            base += (px.get(m, 0.0) - py.get(m, 0.0)) ** 2
        base += (x.root_length - y.root_length) ** 2
    if not ax:
        return sqrt(base)

    best = None
    for n_blocks in range(1, min(len(ax), len(by)) + 1):
        for a_blocks in ordered_partitions(ax, n_blocks):
            for b_blocks in ordered_partitions(by, n_blocks):
                valid = True
                for j in range(n_blocks):
                    for bm, _ in b_blocks[j]:
                        later = (am for i in range(j + 1, n_blocks)
                                 for am, _ in a_blocks[i])
                        if any(not masks_compatible(bm, am) for am in later):
                            valid = False
                            break
                    if not valid:
                        break
                if not valid:
                    continue
                norms = [(sqrt(sum(l * l for _, l in A)),
                          sqrt(sum(l * l for _, l in B)))
                         for A, B in zip(a_blocks, b_blocks)]
                if any(norms[i][0] * norms[i + 1][1] >
                       norms[i + 1][0] * norms[i][1] + 1e-15
                       for i in range(n_blocks - 1)):
                    continue
                value = base + sum((na + nb) ** 2 for na, nb in norms)
                if best is None or value < best:
                    best = value
    return sqrt(best)


def count_resolved_topologies(n_taxa: int) -> int:
    """Number of fully resolved topologies, by exhaustive extension of
    pairwise compatible split sets."""
    full = ((1 << (n_taxa + 1)) - 1) & ~1
    candidates = [m for m in range(2, full, 2) if m & (m - 1)]
    target = n_taxa - 2

    def extend(chosen, start):
        if len(chosen) == target:
            return 1
        total = 0
        for i in range(start, len(candidates)):
            m = candidates[i]
            if all(masks_compatible(m, c) for c in chosen):
                total += extend(chosen + [m], i + 1)
        return total

    return extend([], 0)


def double_factorial(n: int) -> int:
    result = 1
    while n > 1:
        result *= n
        n -= 2
    return result


def finite_difference_hessian(fn, h, dim=3):
    """Central second differences of a scalar function of `dim` coordinates."""
    import numpy as np

    hess = np.zeros((dim, dim))
    zero = [0.0] * dim
    f0 = fn(zero)
    for i in range(dim):
        plus = [h if k == i else 0.0 for k in range(dim)]
        minus = [-h if k == i else 0.0 for k in range(dim)]
        hess[i, i] = (fn(plus) - 2 * f0 + fn(minus)) / h ** 2
    for i in range(dim):
        for j in range(i + 1, dim):
            pp = fn([h if k in (i, j) else 0.0 for k in range(dim)])
            pm = fn([h if k == i else -h if k == j else 0.0 for k in range(dim)])
            mp = fn([-h if k == i else h if k == j else 0.0 for k in range(dim)])
            mm = fn([-h if k in (i, j) else 0.0 for k in range(dim)])
            hess[i, j] = hess[j, i] = (pp - pm - mp + mm) / (4 * h ** 2)
    return hess
