"""RBF field construction: atoms and bond midpoints rendered as Gaussian bumps.

Each atom channel holds the sum over atoms of that element of
amplitude * exp(-|x - m|^2 / (2 sigma^2)) evaluated at every voxel center;
each bond channel does the same over midpoints of bonds of that order.
"""

from __future__ import annotations

import numpy as np

from .grid import BOND_CHANNELS, FieldTensor, GridSpec, RbfParams
from .molecule import Molecule
from .orient import canonical_orient


class CoverageError(ValueError):
    """A component's 2-sigma ball does not fit inside the evaluated positions."""

    def __init__(self, atom_index: int, position: np.ndarray):
        x, y, z = position
        super().__init__(
            f"atom {atom_index} at ({x:.3f}, {y:.3f}, {z:.3f}) violates grid coverage"
        )
        self.atom_index = atom_index


def _check_coverage(
    symbols: tuple[str, ...], positions: np.ndarray, spec: GridSpec, params: RbfParams
) -> None:
    lo = spec.min_corner()
    hi = spec.max_corner()
    for i, sym in enumerate(symbols):
        margin = 2.0 * params.sigma_for(sym)
        if np.any(positions[i] - margin < lo) or np.any(positions[i] + margin > hi):
            raise CoverageError(i, positions[i])


def _add_component(
    out: np.ndarray, spec: GridSpec, center: np.ndarray, sigma: float, amplitude: float
) -> None:
    # Separable evaluation: exp(-(dx^2+dy^2+dz^2)/2s^2) as an outer product.
    factors = [
        np.exp(-((spec.axis_coords(ax) - center[ax]) ** 2) / (2.0 * sigma * sigma))
        for ax in range(3)
    ]
    out += amplitude * np.einsum("i,j,k->ijk", *factors)


def voxelize(
    mol: Molecule,
    spec: GridSpec,
    params: RbfParams = RbfParams(),
    atom_channels: tuple[str, ...] | None = None,
    orient: bool = True,
) -> FieldTensor:
    """Render a molecule as a multi-channel voxel field.

    With orient=True the molecule is canonically oriented and its centroid is
    placed at the geometric center of the grid. Raises CoverageError when an
    atom's 2-sigma ball extends outside the evaluated positions.
    """
    if atom_channels is None:
        atom_channels = tuple(dict.fromkeys(mol.symbols))
    for sym in mol.symbols:
        if sym not in atom_channels:
            raise ValueError(f"element {sym} has no channel in layout {atom_channels}")

    if orient:
        _, positions = canonical_orient(mol.positions)
        positions = positions + spec.center()
    else:
        positions = np.asarray(mol.positions, dtype=np.float64)
    _check_coverage(mol.symbols, positions, spec, params)

    data = np.zeros((len(atom_channels) + len(BOND_CHANNELS), *spec.dims), dtype=np.float64)
    for i, sym in enumerate(mol.symbols):
        ch = atom_channels.index(sym)
        _add_component(data[ch], spec, positions[i], params.sigma_for(sym), params.amplitude_for(sym))
    for i, j, order in mol.bonds:
        name = BOND_CHANNELS[order - 1]
        ch = len(atom_channels) + order - 1
        midpoint = (positions[i] + positions[j]) / 2.0
        _add_component(data[ch], spec, midpoint, params.sigma_for(name), params.amplitude_for(name))
    return FieldTensor(spec, tuple(atom_channels), BOND_CHANNELS, data)
