"""Voxel grid specification, multi-channel field tensors, and the FMGF binary format.

A FieldTensor holds a K x H x W x D array where the first channels are atom
channels (one per element of the channel layout) followed by the three bond
channels. Evaluated positions are voxel centers: origin + resolution * index.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Mapping

import numpy as np

from .elements import GEOM_ELEMENTS, QM9_ELEMENTS

BOND_CHANNELS: tuple[str, ...] = ("bond1", "bond2", "bond3")

FMGF_MAGIC = b"FMGF"
FMGF_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Evaluated positions: origin + resolution * (h, w, d) voxel centers."""

    dims: tuple[int, int, int]
    resolution: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    def axis_coords(self, axis: int) -> np.ndarray:
        """Voxel-center coordinates along one axis (Angstroms)."""
        return self.origin[axis] + self.resolution * np.arange(self.dims[axis])

    def center(self) -> np.ndarray:
        """Geometric center of the evaluated positions."""
        return np.array(self.origin) + self.resolution * (np.array(self.dims) - 1) / 2.0

    def min_corner(self) -> np.ndarray:
        return np.array(self.origin, dtype=np.float64)

    def max_corner(self) -> np.ndarray:
        return np.array(self.origin) + self.resolution * (np.array(self.dims) - 1)


@dataclass(frozen=True)
class RbfParams:
    """Isotropic Gaussian component parameters.

    `sigma` and `amplitude` may be scalars (applied to all channels) or
    per-channel mappings. With the default amplitude 1, an isolated
    component centered exactly on a grid point attains field value 1.
    """

    sigma: float | Mapping[str, float] = 0.224
    amplitude: float | Mapping[str, float] = 1.0

    def __post_init__(self) -> None:
        sigmas = self.sigma.values() if isinstance(self.sigma, Mapping) else [self.sigma]
        if any(not s > 0 for s in sigmas):
            raise ValueError("sigma must be positive")

    def sigma_for(self, channel: str) -> float:
        if isinstance(self.sigma, Mapping):
            return float(self.sigma[channel])
        return float(self.sigma)

    def amplitude_for(self, channel: str) -> float:
        if isinstance(self.amplitude, Mapping):
            return float(self.amplitude[channel])
        return float(self.amplitude)


@dataclass(frozen=True, eq=False)
class FieldTensor:
    """K-channel voxel field: atom channels first, then bond channels."""

    spec: GridSpec
    atom_channels: tuple[str, ...]
    bond_channels: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.n_channels, *self.spec.dims)
        data = np.asarray(self.data)
        if data.shape != expected:
            raise ValueError(f"data shape {data.shape} does not match {expected}")
        if not np.all(np.isfinite(data)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> tuple[str, ...]:
        return self.atom_channels + self.bond_channels

    @property
    def n_channels(self) -> int:
        return len(self.atom_channels) + len(self.bond_channels)

    def channel(self, name: str) -> np.ndarray:
        return self.data[self.channels.index(name)]

    def bond_channel(self, order: int) -> np.ndarray:
        return self.data[len(self.atom_channels) + order - 1]

    def like(self, data: np.ndarray) -> "FieldTensor":
        return FieldTensor(self.spec, self.atom_channels, self.bond_channels, data)

    def zeros_like(self) -> "FieldTensor":
        return self.like(np.zeros_like(self.data))


def channel_layout(kind: str) -> tuple[str, ...]:
    """Atom channel names for a dataset kind: 'qm9', 'geom' or 'toy'."""
    if kind == "qm9" or kind == "toy":
        return QM9_ELEMENTS
    if kind == "geom":
        return GEOM_ELEMENTS
    raise ValueError(f"unknown dataset kind {kind!r}")


def grid_default(kind: str, dims: tuple[int, int, int] | None = None) -> GridSpec:
    """Default grids: qm9 32^3 at 0.33 A, geom 64x40x32 at 0.33 A, toy 16^3."""
    if kind == "qm9":
        return GridSpec((32, 32, 32), 0.33)
    if kind == "geom":
        return GridSpec((64, 40, 32), 0.33)
    if kind == "toy":
        return GridSpec(dims if dims is not None else (16, 16, 16), 0.33)
    raise ValueError(f"unknown dataset kind {kind!r}")


def _split_channels(names: list[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    atoms = tuple(n for n in names if not n.startswith("bond"))
    bonds = tuple(n for n in names if n.startswith("bond"))
    if list(atoms) + list(bonds) != names:
        raise ValueError("atom channels must precede bond channels")
    return atoms, bonds


def write_fmgf(stream: BinaryIO, fields: list[FieldTensor] | tuple[FieldTensor, ...]) -> None:
    """Write field tensors as consecutive FMGF records.

    Record layout, all little-endian: magic "FMGF", version u32, K/H/W/D u32,
    resolution f64, origin 3xf64, channel table (per channel: length u32 +
    ASCII bytes), then K*H*W*D f32 values in C order (channel-major, then
    first spatial axis).
    """
    for f in fields:
        stream.write(FMGF_MAGIC)
        stream.write(struct.pack("<5I", FMGF_VERSION, f.n_channels, *f.spec.dims))
        stream.write(struct.pack("<4d", f.spec.resolution, *f.spec.origin))
        for name in f.channels:
            raw = name.encode("ascii")
            stream.write(struct.pack("<I", len(raw)))
            stream.write(raw)
        stream.write(np.ascontiguousarray(f.data, dtype="<f4").tobytes())


def read_fmgf(stream: BinaryIO) -> list[FieldTensor]:
    """Read all FMGF records from a stream."""
    out: list[FieldTensor] = []
    while True:
        magic = stream.read(4)
        if not magic:
            return out
        if magic != FMGF_MAGIC:
            raise ValueError(f"bad FMGF magic {magic!r}")
        version, k, h, w, d = struct.unpack("<5I", stream.read(20))
        if version != FMGF_VERSION:
            raise ValueError(f"unsupported FMGF version {version}")
        resolution, ox, oy, oz = struct.unpack("<4d", stream.read(32))
        names: list[str] = []
        for _ in range(k):
            (length,) = struct.unpack("<I", stream.read(4))
            names.append(stream.read(length).decode("ascii"))
        count = k * h * w * d
        raw = stream.read(4 * count)
        if len(raw) != 4 * count:
            raise ValueError("truncated FMGF data block")
        data = np.frombuffer(raw, dtype="<f4").reshape(k, h, w, d).astype(np.float64)
        atoms, bonds = _split_channels(names)
        spec = GridSpec((h, w, d), resolution, (ox, oy, oz))
        out.append(FieldTensor(spec, atoms, bonds, data))


def save_fmgf(path: str, fields: list[FieldTensor] | tuple[FieldTensor, ...]) -> None:
    with open(path, "wb") as fh:
        write_fmgf(fh, fields)


def load_fmgf(path: str) -> list[FieldTensor]:
    with open(path, "rb") as fh:
        return read_fmgf(fh)
