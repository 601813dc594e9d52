"""Canonical labeling of molecular graphs.

Iterative neighborhood refinement (element + incident bond-order multiset,
then rounds of neighbor-label multisets) to a stable partition, followed by
a backtracking search that individualizes atoms of the first non-singleton
cell and keeps the lexicographically smallest graph encoding. Positions are
ignored: the key depends only on elements and typed connectivity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .molecule import Molecule


@dataclass(frozen=True)
class CanonicalKey:
    """Fixed-width digest of the canonical labeled graph."""

    digest: str


def _refine(
    ranks: list[int], adj: list[list[tuple[int, int]]]
) -> list[int]:
    """Refine integer ranks until the induced partition is stable."""
    n = len(ranks)
    while True:
        signatures = [
            (ranks[i], tuple(sorted((order, ranks[j]) for j, order in adj[i])))
            for i in range(n)
        ]
        order_map = {sig: r for r, sig in enumerate(sorted(set(signatures)))}
        new_ranks = [order_map[signatures[i]] for i in range(n)]
        if new_ranks == ranks:
            return ranks
        ranks = new_ranks


def _encode(perm_rank: list[int], mol: Molecule) -> bytes:
    """Encode the graph under a total atom order given by distinct ranks."""
    order = sorted(range(len(perm_rank)), key=lambda i: perm_rank[i])
    position = {atom: k for k, atom in enumerate(order)}
    parts = [",".join(mol.symbols[i] for i in order)]
    edges = sorted(
        (min(position[i], position[j]), max(position[i], position[j]), o)
        for i, j, o in mol.bonds
    )
    parts.append(";".join(f"{a}-{b}:{o}" for a, b, o in edges))
    return "|".join(parts).encode("ascii")


def _search(ranks: list[int], mol: Molecule, adj: list[list[tuple[int, int]]]) -> bytes:
    ranks = _refine(ranks, adj)
    n = len(ranks)
    cells: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        cells.setdefault(r, []).append(i)
    target = None
    for r in sorted(cells):
        if len(cells[r]) > 1:
            target = cells[r]
            break
    if target is None:
        return _encode(ranks, mol)
    best: bytes | None = None
    for atom in target:
        child = [2 * r + 1 for r in ranks]
        child[atom] = 2 * ranks[atom]
        enc = _search(child, mol, adj)
        if best is None or enc < best:
            best = enc
    assert best is not None
    return best


def canonical_key(mol: Molecule) -> CanonicalKey:
    """Permutation-invariant key of the molecular graph (positions ignored)."""
    if mol.n_atoms == 0:
        return CanonicalKey(hashlib.blake2b(b"empty", digest_size=16).hexdigest())
    adj = mol.neighbors()
    initial_sigs = [
        (mol.symbols[i], tuple(sorted(order for _, order in adj[i])))
        for i in range(mol.n_atoms)
    ]
    order_map = {sig: r for r, sig in enumerate(sorted(set(initial_sigs)))}
    ranks = [order_map[sig] for sig in initial_sigs]
    encoding = _search(ranks, mol, adj)
    return CanonicalKey(hashlib.blake2b(encoding, digest_size=16).hexdigest())
