"""Circular (Morgan-style) graph fingerprints and Tanimoto similarity.

Atom identifiers start from (element, degree, total bond order) and are
iteratively rehashed with sorted (bond order, neighbor identifier) lists up
to the radius. All identifiers from all iterations set bits modulo the
fingerprint width. Hashing uses blake2b so bit patterns are stable across
processes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .molecule import Molecule

DEFAULT_BITS = 2048
DEFAULT_RADIUS = 2


def _stable_hash(payload: tuple) -> int:
    digest = hashlib.blake2b(repr(payload).encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class Fingerprint:
    bits: int
    n_bits: int = DEFAULT_BITS
    radius: int = DEFAULT_RADIUS


def fingerprint(
    mol: Molecule, n_bits: int = DEFAULT_BITS, radius: int = DEFAULT_RADIUS
) -> Fingerprint:
    adj = mol.neighbors()
    sums = mol.bond_order_sums()
    ids = [
        _stable_hash((mol.symbols[i], len(adj[i]), int(sums[i])))
        for i in range(mol.n_atoms)
    ]
    collected = set(ids)
    for _ in range(radius):
        ids = [
            _stable_hash((ids[i], tuple(sorted((order, ids[j]) for j, order in adj[i]))))
            for i in range(mol.n_atoms)
        ]
        collected.update(ids)
    bits = 0
    for identifier in collected:
        bits |= 1 << (identifier % n_bits)
    return Fingerprint(bits, n_bits, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|intersection| / |union| over set bits, with 0/0 defined as 0."""
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 0.0
    return (a.bits & b.bits).bit_count() / union
