"""Evaluation metrics for generated molecule sets against reference sets.

Covers neutrality/validity/novelty percentages, per-type count total
variations, maximum test-set Tanimoto similarity, binned-CDF Wasserstein
distances for bond lengths and bond angles, the chirality determinant
distribution, and atom-count conditioning fidelity.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .canon import CanonicalKey, canonical_key
from .fingerprint import fingerprint, tanimoto
from .molecule import (
    Molecule,
    chirality_determinant,
    find_tetrahedral_centers,
    formal_neutrality,
    validity,
)

BOND_LENGTH_BIN = 0.01  # Angstroms
BOND_ANGLE_BIN = 0.1  # degrees
ANGLE_CENTER_EXCLUDED = ("H", "F")
DETERMINANT_BIN = 0.1  # cubic Angstroms
DEGENERATE_DET = 1e-6


def _count_tv(generated: list[Molecule], reference: list[Molecule], per_mol_counts) -> float:
    keys = set()
    gen_counts = [per_mol_counts(m) for m in generated]
    ref_counts = [per_mol_counts(m) for m in reference]
    for c in gen_counts + ref_counts:
        keys.update(c)
    total = 0.0
    for key in keys:
        gen_dist = Counter(c.get(key, 0) for c in gen_counts)
        ref_dist = Counter(c.get(key, 0) for c in ref_counts)
        values = set(gen_dist) | set(ref_dist)
        total += sum(
            abs(ref_dist.get(v, 0) / len(reference) - gen_dist.get(v, 0) / len(generated))
            for v in values
        )
    return total


def tv_counts(
    generated: list[Molecule], reference: list[Molecule]
) -> tuple[float, float]:
    """Summed total variation between per-molecule count distributions,
    over atom types and over bond types."""
    if not generated or not reference:
        raise ValueError("empty set")
    tv_a = _count_tv(generated, reference, lambda m: Counter(m.symbols))
    tv_b = _count_tv(
        generated, reference, lambda m: Counter(order for _, _, order in m.bonds)
    )
    return tv_a, tv_b


def mst(generated: list[Molecule], test: list[Molecule]) -> float:
    """Mean over generated molecules of the max Tanimoto similarity to the test set.

    Callers follow the convention of scoring only valid generated molecules.
    """
    if not generated or not test:
        raise ValueError("empty set")
    test_fps = [fingerprint(m) for m in test]
    gen_fps = [fingerprint(m) for m in generated]
    return float(
        np.mean([max(tanimoto(g, t) for t in test_fps) for g in gen_fps])
    )


def _w1_binned(a: np.ndarray, b: np.ndarray, width: float) -> float:
    """Area between empirical CDFs on a shared grid anchored at the global min."""
    lo = min(a.min(), b.min())
    a_bins = np.floor((a - lo) / width).astype(int)
    b_bins = np.floor((b - lo) / width).astype(int)
    n_bins = int(max(a_bins.max(), b_bins.max())) + 1
    cdf_a = np.cumsum(np.bincount(a_bins, minlength=n_bins)) / a.size
    cdf_b = np.cumsum(np.bincount(b_bins, minlength=n_bins)) / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b)) * width)


def _per_type_w1(
    gen: dict, ref: dict, width: float
) -> tuple[float, list]:
    shared = sorted(set(gen) & set(ref), key=str)
    skipped = sorted(set(gen) ^ set(ref), key=str)
    if not shared:
        raise ValueError("no shared types between the two sets")
    value = float(
        np.mean(
            [_w1_binned(np.asarray(gen[t]), np.asarray(ref[t]), width) for t in shared]
        )
    )
    return value, skipped


def _bond_lengths_by_type(mols: list[Molecule]) -> dict[int, list[float]]:
    out: dict[int, list[float]] = {}
    for m in mols:
        for i, j, order in m.bonds:
            out.setdefault(order, []).append(
                float(np.linalg.norm(m.positions[i] - m.positions[j]))
            )
    return out


def w1_bond_lengths(
    generated: list[Molecule], reference: list[Molecule]
) -> tuple[float, list[int]]:
    """Per-bond-type W1 distance between length distributions, averaged over
    shared types; types present on only one side are skipped and returned."""
    return _per_type_w1(
        _bond_lengths_by_type(generated),
        _bond_lengths_by_type(reference),
        BOND_LENGTH_BIN,
    )


def _bond_angles_by_type(mols: list[Molecule]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for m in mols:
        adj = m.neighbors()
        for k, sym in enumerate(m.symbols):
            if sym in ANGLE_CENTER_EXCLUDED or len(adj[k]) < 2:
                continue
            nbrs = [j for j, _ in adj[k]]
            for a in range(len(nbrs)):
                for b in range(a + 1, len(nbrs)):
                    u = m.positions[nbrs[a]] - m.positions[k]
                    v = m.positions[nbrs[b]] - m.positions[k]
                    cos = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
                    out.setdefault(sym, []).append(
                        float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
                    )
    return out


def w1_bond_angles(
    generated: list[Molecule], reference: list[Molecule]
) -> tuple[float, list[str]]:
    """Per-central-atom-type W1 distance between bond-angle distributions
    (H and F excluded as centers), averaged over shared types."""
    return _per_type_w1(
        _bond_angles_by_type(generated),
        _bond_angles_by_type(reference),
        BOND_ANGLE_BIN,
    )


def neutrality_validity_novelty(
    generated: list[Molecule], train_keys: set[CanonicalKey]
) -> tuple[float, float, float, float]:
    """(atom neutrality %, molecule neutrality %, validity %, novelty %).

    Novelty is the share of valid generated molecules whose canonical key is
    absent from the training keys.
    """
    if not generated:
        raise ValueError("empty set")
    atom_flags: list[bool] = []
    mol_flags: list[bool] = []
    valid_flags: list[bool] = []
    novel_flags: list[bool] = []
    for m in generated:
        flags, all_neutral = formal_neutrality(m)
        atom_flags.extend(flags)
        mol_flags.append(all_neutral)
        ok = validity(m)
        valid_flags.append(ok)
        if ok:
            novel_flags.append(canonical_key(m) not in train_keys)
    atom_pct = 100.0 * np.mean(atom_flags) if atom_flags else 0.0
    mol_pct = 100.0 * np.mean(mol_flags)
    valid_pct = 100.0 * np.mean(valid_flags)
    novelty_pct = 100.0 * np.mean(novel_flags) if novel_flags else 0.0
    return float(atom_pct), float(mol_pct), float(valid_pct), float(novelty_pct)


@dataclass
class ChiralityStats:
    determinants: np.ndarray
    sign_fraction: float
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray


def chirality_distribution(mols: list[Molecule]) -> ChiralityStats:
    """Determinants at all unambiguous tetrahedral carbons, their histogram
    (0.1 A^3 bins) and the positive-sign fraction over non-degenerate values."""
    dets: list[float] = []
    for m in mols:
        for center, triple in find_tetrahedral_centers(m):
            dets.append(chirality_determinant(m, center, triple))
    determinants = np.asarray(dets)
    signed = determinants[np.abs(determinants) >= DEGENERATE_DET]
    sign_fraction = float(np.mean(signed > 0)) if signed.size else 0.0
    if determinants.size:
        lo = np.floor(determinants.min() / DETERMINANT_BIN) * DETERMINANT_BIN
        hi = np.ceil(determinants.max() / DETERMINANT_BIN) * DETERMINANT_BIN
        edges = np.arange(lo, hi + DETERMINANT_BIN / 2, DETERMINANT_BIN)
        if edges.size < 2:
            edges = np.array([lo, lo + DETERMINANT_BIN])
        counts, edges = np.histogram(determinants, bins=edges)
    else:
        edges, counts = np.zeros(1), np.zeros(0, dtype=int)
    return ChiralityStats(determinants, sign_fraction, edges, counts)


def count_fidelity(
    records: list[tuple[int, int]], bins: list[tuple[int, int]]
) -> tuple[float, float, float]:
    """(accuracy %, mean L1, lower-shift L1 fraction) for atom-count conditioning.

    `records` holds (generated atom count, conditioning bin index); `bins`
    holds inclusive (low, high) count ranges. The L1 distance between
    non-matching bins is min(|gen_high - cond_low|, |cond_high - gen_low|).
    """
    if not records:
        raise ValueError("empty set")
    hits = 0
    l1_total = 0.0
    l1_lower = 0.0
    for count, cond_idx in records:
        if not 0 <= cond_idx < len(bins):
            raise ValueError(f"conditioning bin index {cond_idx} out of range")
        gen_idx = next(
            (k for k, (lo, hi) in enumerate(bins) if lo <= count <= hi), None
        )
        if gen_idx is None:
            raise ValueError(f"generated count {count} not covered by bins")
        if gen_idx == cond_idx:
            hits += 1
            continue
        g_lo, g_hi = bins[gen_idx]
        c_lo, c_hi = bins[cond_idx]
        l1 = min(abs(g_hi - c_lo), abs(c_hi - g_lo))
        l1_total += l1
        if gen_idx < cond_idx:
            l1_lower += l1
    accuracy = 100.0 * hits / len(records)
    mean_l1 = l1_total / len(records)
    lower_fraction = l1_lower / l1_total if l1_total > 0 else 0.0
    return accuracy, mean_l1, lower_fraction


@dataclass
class MetricsReport:
    neutrality_atom: float
    neutrality_mol: float
    validity: float
    novelty: float
    tv_a: float
    tv_b: float
    mst: float
    ba: float | None
    bl: float | None
    ba_skipped_types: list[str]
    bl_skipped_types: list[int]
    chirality_sign_fraction: float
    n_chiral_centers: int
    count_accuracy: float | None = None
    count_l1: float | None = None
    count_l1_lower: float | None = None

    def as_dict(self) -> dict:
        return {
            "neutrality_atom": self.neutrality_atom,
            "neutrality_mol": self.neutrality_mol,
            "validity": self.validity,
            "novelty": self.novelty,
            "tv_a": self.tv_a,
            "tv_b": self.tv_b,
            "mst": self.mst,
            "ba": self.ba,
            "bl": self.bl,
            "ba_skipped_types": self.ba_skipped_types,
            "bl_skipped_types": self.bl_skipped_types,
            "chirality_sign_fraction": self.chirality_sign_fraction,
            "n_chiral_centers": self.n_chiral_centers,
            "count_accuracy": self.count_accuracy,
            "count_l1": self.count_l1,
            "count_l1_lower": self.count_l1_lower,
        }


def evaluate_sets(
    generated: list[Molecule],
    reference: list[Molecule],
    train: list[Molecule],
    count_records: list[tuple[int, int]] | None = None,
    count_bins: list[tuple[int, int]] | None = None,
) -> tuple[MetricsReport, ChiralityStats]:
    """Full metric suite for a generated set against reference and training sets."""
    if not generated or not reference or not train:
        raise ValueError("empty set")
    train_keys = {canonical_key(m) for m in train}
    atom_pct, mol_pct, valid_pct, novelty_pct = neutrality_validity_novelty(
        generated, train_keys
    )
    tv_a, tv_b = tv_counts(generated, reference)
    valid_generated = [m for m in generated if validity(m)]
    mst_value = mst(valid_generated, reference) if valid_generated else 0.0
    try:
        bl, bl_skipped = w1_bond_lengths(generated, reference)
    except ValueError:
        bl, bl_skipped = None, sorted(
            set(_bond_lengths_by_type(generated)) | set(_bond_lengths_by_type(reference))
        )
    try:
        ba, ba_skipped = w1_bond_angles(generated, reference)
    except ValueError:
        ba, ba_skipped = None, sorted(
            set(_bond_angles_by_type(generated)) | set(_bond_angles_by_type(reference))
        )
    chirality = chirality_distribution(generated)
    report = MetricsReport(
        neutrality_atom=atom_pct,
        neutrality_mol=mol_pct,
        validity=valid_pct,
        novelty=novelty_pct,
        tv_a=tv_a,
        tv_b=tv_b,
        mst=mst_value,
        ba=ba,
        bl=bl,
        ba_skipped_types=list(ba_skipped),
        bl_skipped_types=list(bl_skipped),
        chirality_sign_fraction=chirality.sign_fraction,
        n_chiral_centers=int(chirality.determinants.size),
    )
    if count_records is not None and count_bins is not None:
        acc, l1, lower = count_fidelity(count_records, count_bins)
        report.count_accuracy = acc
        report.count_l1 = l1
        report.count_l1_lower = lower
    return report, chirality


def write_report_json(path: str, report: MetricsReport, config: dict | None = None) -> None:
    payload = {"metrics": report.as_dict()}
    if config is not None:
        payload["config"] = config
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(path: str, report: MetricsReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in report.as_dict().items():
            writer.writerow([key, "" if value is None else value])


def write_chirality_csvs(prefix: str, stats: ChiralityStats) -> None:
    with open(f"{prefix}.determinants.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["determinant"])
        for det in stats.determinants:
            writer.writerow([repr(float(det))])
    with open(f"{prefix}.chirality_hist.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_low", "bin_high", "count", "sign_fraction"])
        for k in range(stats.histogram_counts.size):
            writer.writerow(
                [
                    repr(float(stats.histogram_edges[k])),
                    repr(float(stats.histogram_edges[k + 1])),
                    int(stats.histogram_counts[k]),
                    repr(stats.sign_fraction) if k == 0 else "",
                ]
            )
