"""Shared helpers: deterministic RNG derivation, float formatting, parallel map."""

import hashlib
import random
from multiprocessing import get_context

# Absolute tolerance for comparing edge lengths between trees.
TREE_ATOL = 1e-12
# Interpolated edges shorter than this are treated as absent.
LENGTH_CUTOFF = 1e-12


def derived_rng(*keys) -> random.Random:
    """Return a ``random.Random`` seeded deterministically from *keys*.

    The stream depends only on the key values (ints or strings), never on
    hash randomization or process layout, so per-datum streams derived from a
    master seed give results independent of how work is partitioned.
    """
    text = "\x1f".join(repr(k) for k in keys).encode()
    digest = hashlib.blake2b(text, digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


def fmt(value: float) -> str:
    """Format a float at 12 significant digits (the serialization contract)."""
    return format(float(value), ".12g")


def _call(item):
    fn, arg = item
    return fn(arg)


def parallel_map(fn, items, n_jobs=1):
    """Map *fn* over *items*, optionally across processes.

    Results are returned in input order. ``fn`` must be picklable
    (a module-level function) when ``n_jobs > 1``.
    """
    items = list(items)
    if n_jobs is None or n_jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    ctx = get_context("fork")
    with ctx.Pool(min(n_jobs, len(items))) as pool:
        return pool.map(_call, [(fn, it) for it in items], chunksize=1)
