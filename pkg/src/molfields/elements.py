"""Chemical element tables for the supported element set {H, C, N, O, F, P, S, Cl}."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Element:
    """An element symbol together with its allowed neutral valences."""

    symbol: str
    neutral_valences: frozenset[int]
    max_valence: int


def _el(symbol: str, neutral: tuple[int, ...], max_valence: int) -> Element:
    return Element(symbol, frozenset(neutral), max_valence)


# Neutral valences: bond-order sums an atom may carry at formal charge 0.
# Max valence: the largest bond-order sum tolerated by the validity check
# (allows common charged states such as ammonium N or hydronium O).
PERIODIC: dict[str, Element] = {
    "H": _el("H", (1,), 1),
    "C": _el("C", (4,), 4),
    "N": _el("N", (3,), 4),
    "O": _el("O", (2,), 3),
    "F": _el("F", (1,), 1),
    "P": _el("P", (3, 5), 5),
    "S": _el("S", (2, 4, 6), 6),
    "Cl": _el("Cl", (1,), 1),
}

SYMBOLS: tuple[str, ...] = tuple(PERIODIC)

# Channel layouts for the two dataset flavours plus a small-grid toy setup.
QM9_ELEMENTS: tuple[str, ...] = ("H", "C", "N", "O", "F")
GEOM_ELEMENTS: tuple[str, ...] = ("H", "C", "N", "O", "F", "P", "S", "Cl")


def element(symbol: str) -> Element:
    try:
        return PERIODIC[symbol]
    except KeyError:
        raise ValueError(f"unknown element symbol {symbol!r}") from None
