"""Digraph enumeration up to isomorphism and an independent minimum
edge-deletion-to-transitivity computation (bitmask dynamic programming)."""

from __future__ import annotations

import itertools

import numpy as np


def pair_index(n):
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    return pairs, {e: i for i, e in enumerate(pairs)}


def iso_classes(n):
    """One representative edge mask per isomorphism class of digraphs on ``n``
    labelled vertices (no self-loops)."""
    pairs, idx = pair_index(n)
    m = len(pairs)
    masks = np.arange(1 << m, dtype=np.int64)
    best = masks.copy()
    for perm in itertools.permutations(range(n)):
        img = np.zeros_like(masks)
        for i, (a, b) in enumerate(pairs):
            j = idx[(perm[a], perm[b])]
            img |= ((masks >> i) & 1) << j
        np.minimum(best, img, out=best)
    return sorted(set(best.tolist()))


def transitive_masks(n):
    """Boolean array: mask is transitive (``a->b->c`` with ``a != c`` implies ``a->c``)."""
    pairs, idx = pair_index(n)
    masks = np.arange(1 << len(pairs), dtype=np.int64)
    ok = np.ones(len(masks), dtype=bool)
    for a, b, c in itertools.permutations(range(n), 3):
        ab = (masks >> idx[(a, b)]) & 1
        bc = (masks >> idx[(b, c)]) & 1
        ac = (masks >> idx[(a, c)]) & 1
        ok &= ~((ab & bc & (1 - ac)).astype(bool))
    return ok


def min_deletions(n):
    """For every edge mask, the least number of edges whose deletion leaves a
    transitive digraph (max transitive submask via a subset-max transform)."""
    m = n * (n - 1)
    size = 1 << m
    pop = np.zeros(size, dtype=np.int64)
    for i in range(m):
        pop += (np.arange(size, dtype=np.int64) >> i) & 1
    best = np.where(transitive_masks(n), pop, -1)
    for i in range(m):
        view = best.reshape(-1, 2, 1 << i)
        np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return pop - best


def edges_of(n, mask):
    pairs, _ = pair_index(n)
    names = [chr(ord("a") + i) for i in range(n)]
    verts = tuple(names)
    return verts, [(names[a], names[b]) for i, (a, b) in enumerate(pairs) if mask >> i & 1]
