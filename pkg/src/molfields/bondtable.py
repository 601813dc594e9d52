"""Reference covalent bond lengths derived from published per-order radii."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def _table() -> dict:
    with resources.files("molfields.data").joinpath("covalent_radii.json").open() as fh:
        return json.load(fh)


def table_version() -> str:
    return _table()["version"]


def bond_length(a: str, b: str, order: int) -> float | None:
    """Sum of order-specific covalent radii, or None when undefined for the pair."""
    radii = _table()["radii"]
    ra = radii[a][str(order)]
    rb = radii[b][str(order)]
    if ra is None or rb is None:
        return None
    return ra + rb


def max_bond_length(a: str, b: str) -> float:
    """Largest tabulated length over bond orders; the pair-screening reference."""
    lengths = [bond_length(a, b, order) for order in (1, 2, 3)]
    defined = [l for l in lengths if l is not None]
    if not defined:
        raise ValueError(f"no tabulated bond length for pair ({a}, {b})")
    return max(defined)
