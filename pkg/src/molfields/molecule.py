"""Molecular data model: typed atoms with 3D positions and integer-order bonds.

Positions are in Angstroms. Bond orders are restricted to {1, 2, 3}
(Kekule representation; no aromatic bond type).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .elements import PERIODIC, element


@dataclass(frozen=True, eq=False)
class Molecule:
    """Immutable molecule: element symbols, (n, 3) positions, (i, j, order) bonds."""

    symbols: tuple[str, ...]
    positions: np.ndarray
    bonds: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.shape != (len(self.symbols), 3):
            raise ValueError(
                f"positions shape {pos.shape} does not match {len(self.symbols)} atoms"
            )
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        for sym in self.symbols:
            element(sym)
        n = len(self.symbols)
        seen: set[tuple[int, int]] = set()
        for i, j, order in self.bonds:
            if i == j:
                raise ValueError(f"bond endpoints must be distinct: ({i}, {j})")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"bond index out of range: ({i}, {j}) with {n} atoms")
            if order not in (1, 2, 3):
                raise ValueError(f"bond order must be 1, 2 or 3, got {order}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate bond between atoms {key}")
            seen.add(key)

    @property
    def n_atoms(self) -> int:
        return len(self.symbols)

    def bond_order_sums(self) -> np.ndarray:
        """Total bond order incident to each atom."""
        sums = np.zeros(self.n_atoms, dtype=np.int64)
        for i, j, order in self.bonds:
            sums[i] += order
            sums[j] += order
        return sums

    def neighbors(self) -> list[list[tuple[int, int]]]:
        """Adjacency as per-atom lists of (neighbor index, bond order)."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_atoms)]
        for i, j, order in self.bonds:
            adj[i].append((j, order))
            adj[j].append((i, order))
        return adj

    def with_positions(self, positions: np.ndarray) -> "Molecule":
        return Molecule(self.symbols, positions, self.bonds)


def make_molecule(
    atoms: Iterable[tuple[str, Sequence[float]]],
    bonds: Iterable[tuple[int, int, int]] = (),
) -> Molecule:
    """Convenience constructor from (symbol, xyz) pairs."""
    atoms = list(atoms)
    symbols = tuple(sym for sym, _ in atoms)
    positions = np.array([xyz for _, xyz in atoms], dtype=np.float64).reshape(len(atoms), 3)
    return Molecule(symbols, positions, tuple(bonds))


def formal_neutrality(mol: Molecule) -> tuple[list[bool], bool]:
    """Per-atom neutrality flags and the all-neutral verdict.

    An atom is neutral when its bond-order sum is one of the allowed
    neutral valences of its element.
    """
    sums = mol.bond_order_sums()
    flags = [
        int(sums[i]) in PERIODIC[sym].neutral_valences
        for i, sym in enumerate(mol.symbols)
    ]
    return flags, all(flags) if flags else True


def validity(mol: Molecule) -> bool:
    """True when every atom's bond-order sum is within its element's max valence
    and the molecule is nonempty."""
    if mol.n_atoms == 0:
        return False
    sums = mol.bond_order_sums()
    return all(
        int(sums[i]) <= PERIODIC[sym].max_valence for i, sym in enumerate(mol.symbols)
    )


def chirality_determinant(
    mol: Molecule, center: int, neighbor_triple: Sequence[int]
) -> float:
    """Determinant of the 3x3 matrix of neighbor offsets from the center atom.

    Rows are position(k) - position(center) for the three neighbors in the
    given order. The sign distinguishes mirror-image configurations; the
    absolute value is the volume spanned by the four atoms (A^3 units).
    """
    if len(neighbor_triple) != 3:
        raise ValueError("exactly three neighbor indices required")
    idx = [center, *neighbor_triple]
    if len(set(idx)) != 4:
        raise ValueError("center and neighbors must be distinct")
    for k in idx:
        if not 0 <= k < mol.n_atoms:
            raise ValueError(f"atom index {k} out of range")
    rows = mol.positions[list(neighbor_triple)] - mol.positions[center]
    return float(np.linalg.det(rows))


DEFAULT_TRIPLE_PRIORITY: tuple[str, ...] = ("O", "N", "H")


def find_tetrahedral_centers(
    mol: Molecule, priority: Sequence[str] = DEFAULT_TRIPLE_PRIORITY
) -> list[tuple[int, tuple[int, int, int]]]:
    """Carbons with four single-bonded neighbors and an unambiguous neighbor triple.

    The triple is picked by walking the element priority list and selecting,
    for each listed element, the unique neighbor of that element; elements
    occurring zero or several times among the neighbors are skipped. Centers
    yielding fewer than three picks are excluded, so determinant signs are
    comparable across molecules under one fixed ordering convention.
    """
    adj = mol.neighbors()
    out: list[tuple[int, tuple[int, int, int]]] = []
    for c, sym in enumerate(mol.symbols):
        if sym != "C":
            continue
        single = [j for j, order in adj[c] if order == 1]
        if len(adj[c]) != 4 or len(single) != 4:
            continue
        picks: list[int] = []
        for want in priority:
            matches = [j for j in single if mol.symbols[j] == want]
            if len(matches) == 1:
                picks.append(matches[0])
            if len(picks) == 3:
                break
        if len(picks) == 3:
            out.append((c, (picks[0], picks[1], picks[2])))
    return out
