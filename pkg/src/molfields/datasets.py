"""Synthetic molecule builders: random valid molecules for round-trip testing
and a chiral tetrahedral toy set for enantiomer experiments."""

from __future__ import annotations

import numpy as np

from .bondtable import bond_length
from .elements import PERIODIC
from .molecule import Molecule, chirality_determinant

# Minimum distance between non-bonded atoms. Keeps same-element pairs well
# above the separation where threshold-0.3 peak picking can merge components.
MIN_NONBONDED_SEP = 1.35

_HEAVY_CHOICES = ("C", "C", "C", "C", "N", "N", "O", "O", "F")
_ORDER_WEIGHTS = {1: 0.8, 2: 0.15, 3: 0.05}


def _neutral_valence(symbol: str) -> int:
    return min(PERIODIC[symbol].neutral_valences)


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def _placement_ok(
    pos: np.ndarray,
    parent: int,
    positions: list[np.ndarray],
    bond_dirs: list[list[np.ndarray]],
    direction: np.ndarray,
    max_radius: float,
) -> bool:
    if np.linalg.norm(pos - positions[0]) > max_radius:
        return False
    for k, other in enumerate(positions):
        if k != parent and np.linalg.norm(pos - other) < MIN_NONBONDED_SEP:
            return False
    for d in bond_dirs[parent]:
        if np.dot(direction, d) > np.cos(np.radians(85.0)):
            return False
    return True


def random_molecule(
    rng: np.random.Generator,
    n_heavy: int = 5,
    max_radius: float = 4.2,
    max_restarts: int = 200,
) -> Molecule:
    """Random all-neutral molecule: a heavy-atom tree with realistic bond
    lengths, sibling-bond angles >= 85 degrees, and hydrogens filling the
    remaining valence."""
    for _ in range(max_restarts):
        mol = _try_random_molecule(rng, n_heavy, max_radius)
        if mol is not None:
            return mol
    raise RuntimeError(f"could not place a molecule with {n_heavy} heavy atoms")


def _try_random_molecule(
    rng: np.random.Generator, n_heavy: int, max_radius: float
) -> Molecule | None:
    symbols: list[str] = [str(rng.choice(_HEAVY_CHOICES))]
    positions: list[np.ndarray] = [np.zeros(3)]
    bond_dirs: list[list[np.ndarray]] = [[]]
    remaining = [_neutral_valence(symbols[0])]
    bonds: list[tuple[int, int, int]] = []

    for _ in range(n_heavy - 1):
        sym = str(rng.choice(_HEAVY_CHOICES))
        open_parents = [k for k in range(len(symbols)) if remaining[k] >= 1]
        if not open_parents:
            return None
        parent = int(rng.choice(open_parents))
        max_order = min(remaining[parent], _neutral_valence(sym))
        orders = [o for o in (1, 2, 3) if o <= max_order and bond_length(symbols[parent], sym, o)]
        weights = np.array([_ORDER_WEIGHTS[o] for o in orders])
        order = int(rng.choice(orders, p=weights / weights.sum()))
        length = bond_length(symbols[parent], sym, order) + rng.uniform(-0.02, 0.02)
        placed = False
        for _ in range(80):
            direction = _random_unit(rng)
            pos = positions[parent] + length * direction
            if _placement_ok(pos, parent, positions, bond_dirs, direction, max_radius):
                placed = True
                break
        if not placed:
            return None
        idx = len(symbols)
        symbols.append(sym)
        positions.append(pos)
        bond_dirs.append([-direction])
        bond_dirs[parent].append(direction)
        remaining.append(_neutral_valence(sym) - order)
        remaining[parent] -= order
        bonds.append((parent, idx, order))

    # Hydrogen fill to exact neutrality.
    for heavy in range(n_heavy):
        for _ in range(remaining[heavy]):
            length = bond_length(symbols[heavy], "H", 1) + rng.uniform(-0.02, 0.02)
            placed = False
            for _ in range(80):
                direction = _random_unit(rng)
                pos = positions[heavy] + length * direction
                if _placement_ok(pos, heavy, positions, bond_dirs, direction, max_radius):
                    placed = True
                    break
            if not placed:
                return None
            idx = len(symbols)
            symbols.append("H")
            positions.append(pos)
            bond_dirs.append([-direction])
            bond_dirs[heavy].append(direction)
            bonds.append((heavy, idx, 1))
    return Molecule(tuple(symbols), np.vstack(positions), tuple(bonds))


_TETRA_DIRS = np.array(
    [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)], dtype=np.float64
) / np.sqrt(3.0)


def _orthonormal_pair(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    p = np.cross(u, ref)
    p /= np.linalg.norm(p)
    return p, np.cross(u, p)


def _substituent_dirs(u: np.ndarray, cos_axis: float, phases: list[float]) -> list[np.ndarray]:
    p, q = _orthonormal_pair(u)
    sin_axis = np.sqrt(1.0 - cos_axis**2)
    return [cos_axis * u + sin_axis * (np.cos(f) * p + np.sin(f) * q) for f in phases]


def chiral_center_molecule(rng: np.random.Generator, jitter: float = 0.02) -> Molecule:
    """One tetrahedral carbon bonded to O, N, H and C, substituents filled with
    hydrogens. The (O, N, H) offset determinant is positive by construction."""
    c = np.zeros(3)
    m_o = bond_length("C", "O", 1) * _TETRA_DIRS[0]
    m_n = bond_length("C", "N", 1) * _TETRA_DIRS[1]
    m_h = bond_length("C", "H", 1) * _TETRA_DIRS[2]
    m_c2 = bond_length("C", "C", 1) * _TETRA_DIRS[3]

    atoms = [("C", c), ("O", m_o), ("N", m_n), ("H", m_h), ("C", m_c2)]
    bonds = [(0, 1, 1), (0, 2, 1), (0, 3, 1), (0, 4, 1)]

    def add_hydrogens(parent_idx: int, parent_pos: np.ndarray, cos_axis: float, count: int):
        u = parent_pos - c
        u = u / np.linalg.norm(u)
        base = rng.uniform(0.0, 2 * np.pi)
        phases = [base + 2 * np.pi * k / max(count, 2) for k in range(count)]
        length = bond_length(atoms[parent_idx][0], "H", 1)
        for d in _substituent_dirs(u, cos_axis, phases):
            atoms.append(("H", parent_pos + length * d))
            bonds.append((parent_idx, len(atoms) - 1, 1))

    add_hydrogens(1, m_o, np.cos(np.radians(75.0)), 1)
    add_hydrogens(2, m_n, np.cos(np.radians(73.0)), 2)
    add_hydrogens(4, m_c2, np.cos(np.radians(70.5)), 3)

    positions = np.vstack([p for _, p in atoms])
    positions = positions + rng.uniform(-jitter, jitter, positions.shape)
    mol = Molecule(tuple(s for s, _ in atoms), positions, tuple(bonds))
    assert chirality_determinant(mol, 0, (1, 2, 3)) > 0
    return mol


def chiral_toy_dataset(n: int, rng: np.random.Generator, jitter: float = 0.02) -> list[Molecule]:
    """Distinct conformers of the tetrahedral C(O,N,H,C) motif, all one enantiomer."""
    return [chiral_center_molecule(rng, jitter) for _ in range(n)]


def mirror_molecule(mol: Molecule) -> Molecule:
    """Reflect positions through the yz plane; the graph is unchanged."""
    flipped = mol.positions * np.array([-1.0, 1.0, 1.0])
    return mol.with_positions(flipped)
