"""SDF (molfile V2000 subset) reading and writing, plus a minimal XYZ reader.

Supported molfile subset: three header lines, the counts line, the atom
block, the bond block, "M  END" and the "$$$$" record separator. Charge,
isotope and stereo fields are ignored on read and written as zeros.
Bond order 4 (aromatic) is rejected: molecules must be in Kekule form.
"""

from __future__ import annotations

import numpy as np

from .elements import PERIODIC
from .molecule import Molecule


class SdfParseError(ValueError):
    """Parse failure carrying the 1-based line number of the offending line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _parse_int(text: str, line_no: int, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise SdfParseError(line_no, f"malformed {what}: {text!r}") from None


def _parse_record(lines: list[str], base: int) -> Molecule:
    """Parse one molfile record. `base` is the 0-based index of its first line."""
    if len(lines) < 4:
        raise SdfParseError(base + len(lines), "truncated record header")
    counts_no = base + 4
    counts = lines[3]
    if len(counts) < 6:
        raise SdfParseError(counts_no, f"malformed counts line: {counts!r}")
    n_atoms = _parse_int(counts[0:3], counts_no, "atom count")
    n_bonds = _parse_int(counts[3:6], counts_no, "bond count")
    if n_atoms < 0 or n_bonds < 0:
        raise SdfParseError(counts_no, "negative counts")
    if len(lines) < 4 + n_atoms + n_bonds:
        raise SdfParseError(base + len(lines), "record shorter than counts line claims")

    symbols: list[str] = []
    coords = np.zeros((n_atoms, 3), dtype=np.float64)
    for a in range(n_atoms):
        line_no = counts_no + 1 + a
        line = lines[4 + a]
        try:
            coords[a, 0] = float(line[0:10])
            coords[a, 1] = float(line[10:20])
            coords[a, 2] = float(line[20:30])
        except (ValueError, IndexError):
            raise SdfParseError(line_no, f"malformed atom coordinates: {line!r}") from None
        sym = line[30:34].strip()
        if sym not in PERIODIC:
            raise SdfParseError(line_no, f"unknown element symbol {sym!r}")
        symbols.append(sym)

    bonds: list[tuple[int, int, int]] = []
    for b in range(n_bonds):
        line_no = counts_no + 1 + n_atoms + b
        line = lines[4 + n_atoms + b]
        i = _parse_int(line[0:3], line_no, "bond atom index")
        j = _parse_int(line[3:6], line_no, "bond atom index")
        order = _parse_int(line[6:9], line_no, "bond order")
        if order == 4:
            raise SdfParseError(
                line_no, "aromatic bonds unsupported (Kekulé form required)"
            )
        if order not in (1, 2, 3):
            raise SdfParseError(line_no, f"unsupported bond order {order}")
        if not (1 <= i <= n_atoms and 1 <= j <= n_atoms):
            raise SdfParseError(line_no, f"bond index out of range: {i}-{j}")
        bonds.append((i - 1, j - 1, order))

    try:
        return Molecule(tuple(symbols), coords, tuple(bonds))
    except ValueError as exc:
        raise SdfParseError(counts_no, str(exc)) from None


def parse_sdf(text: str) -> list[Molecule]:
    """Parse a concatenation of V2000 molfile records into molecules."""
    lines = text.splitlines()
    mols: list[Molecule] = []
    record: list[str] = []
    base = 0
    for idx, line in enumerate(lines):
        if line.startswith("$$$$"):
            if any(l.strip() for l in record):
                mols.append(_parse_record(record, base))
            record = []
            base = idx + 1
        else:
            record.append(line)
    if any(l.strip() for l in record):
        mols.append(_parse_record(record, base))
    return mols


def write_sdf(mols: list[Molecule] | tuple[Molecule, ...], names: list[str] | None = None) -> str:
    """Serialize molecules as V2000 molfile records, one "$$$$" per record."""
    out: list[str] = []
    for k, mol in enumerate(mols):
        name = names[k] if names else f"mol{k}"
        out.append(name)
        out.append("  molfields")
        out.append("")
        out.append(f"{mol.n_atoms:3d}{len(mol.bonds):3d}  0  0  0  0  0  0  0  0999 V2000")
        for sym, (x, y, z) in zip(mol.symbols, mol.positions):
            out.append(f"{x:10.4f}{y:10.4f}{z:10.4f} {sym:<3s} 0  0  0  0  0  0  0  0  0  0  0  0")
        for i, j, order in mol.bonds:
            out.append(f"{i + 1:3d}{j + 1:3d}{order:3d}  0  0  0  0")
        out.append("M  END")
        out.append("$$$$")
    return "\n".join(out) + ("\n" if out else "")


def parse_xyz(text: str) -> list[Molecule]:
    """Parse one or more XYZ frames (count line, comment line, "El x y z" rows).

    Returned molecules carry no bonds.
    """
    lines = text.splitlines()
    mols: list[Molecule] = []
    pos = 0
    while pos < len(lines):
        if not lines[pos].strip():
            pos += 1
            continue
        n = _parse_int(lines[pos], pos + 1, "atom count")
        if pos + 2 + n > len(lines):
            raise SdfParseError(len(lines), "truncated XYZ frame")
        symbols: list[str] = []
        coords = np.zeros((n, 3), dtype=np.float64)
        for a in range(n):
            line_no = pos + 3 + a
            parts = lines[pos + 2 + a].split()
            if len(parts) < 4:
                raise SdfParseError(line_no, f"malformed XYZ row: {lines[pos + 2 + a]!r}")
            sym = parts[0]
            if sym not in PERIODIC:
                raise SdfParseError(line_no, f"unknown element symbol {sym!r}")
            symbols.append(sym)
            try:
                coords[a] = [float(parts[1]), float(parts[2]), float(parts[3])]
            except ValueError:
                raise SdfParseError(line_no, "malformed XYZ coordinates") from None
        mols.append(Molecule(tuple(symbols), coords))
        pos += 2 + n
    return mols
