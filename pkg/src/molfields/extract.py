"""Molecular graph recovery from (possibly noisy) field tensors.

Four stages, in order: threshold peak extraction per atom channel,
least-squares refinement of atom positions, lenient distance-plus-probe bond
candidate enumeration, and least-squares optimization of per-bond amplitudes
gamma_ij that removes candidates without field support.

Both optimizations run plain gradient descent on a mean squared residual
between the field and the RBF mixture, evaluated only at voxels within
3 sigma of a component center (the residual is constant in the parameters
elsewhere, so gradients are unaffected). The position objective is
normalized per channel by the full grid size and the amplitude objective by
the evaluation-window size: the two stages' curvatures differ by roughly
1/sigma^2, and these are the normalizations under which the default learning
rate 5 both converges for any molecule size and drives unsupported
amplitudes decisively to zero within the default iteration budget. The bond
screening length for a pair is the tabulated maximum covalent bond length
plus the margin d1: the margin value is far below any bond length, so it is
interpreted as an additive slack over the reference length, not an absolute
cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .bondtable import max_bond_length, table_version
from .grid import FieldTensor, GridSpec, RbfParams
from .molecule import Molecule

_NEIGHBOR_OFFSETS = np.array(
    [
        (dh, dw, dd)
        for dh in (-1, 0, 1)
        for dw in (-1, 0, 1)
        for dd in (-1, 0, 1)
        if (dh, dw, dd) != (0, 0, 0)
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class ExtractionConfig:
    peak_threshold: float = 0.3
    bond_margin: float = 0.35
    bond_probe_radius: float = 0.45
    bond_value_threshold: float = 0.3
    opt_iterations: int = 500
    opt_learning_rate: float = 5.0
    gamma_keep_threshold: float = 0.5
    window_sigmas: float = 3.0
    weighted_peak_mean: bool = False
    optimize_gammas: bool = True


@dataclass
class ExtractionResult:
    molecule: Molecule
    component_sizes: list[int]
    candidates: list[tuple[int, int, int]]
    gammas: np.ndarray
    removed_bonds: list[tuple[int, int, int]]
    position_loss: tuple[float, float]
    gamma_loss: tuple[float, float]
    bond_table_version: str = dataclass_field(default_factory=table_version)

    def diagnostics_dict(self) -> dict:
        return {
            "component_sizes": self.component_sizes,
            "candidates": [list(c) for c in self.candidates],
            "gammas": [float(g) for g in self.gammas],
            "removed_bonds": [list(b) for b in self.removed_bonds],
            "position_loss": list(self.position_loss),
            "gamma_loss": list(self.gamma_loss),
            "bond_table_version": self.bond_table_version,
        }


def peak_extract(
    values: np.ndarray, threshold: float, spec: GridSpec, weighted: bool = False
) -> tuple[np.ndarray, list[int]]:
    """Positions of 26-connected components of {voxels > threshold}.

    Each component contributes the unweighted mean of its voxel-center
    coordinates (intensity-weighted behind the `weighted` flag). Flood fill
    runs iteratively on an explicit work stack, so component size is not
    limited by recursion depth.
    """
    mask = values > threshold
    dims = np.array(values.shape)
    visited = np.zeros(values.shape, dtype=bool)
    positions: list[np.ndarray] = []
    sizes: list[int] = []
    for flat in np.flatnonzero(mask):
        start = np.unravel_index(flat, values.shape)
        if visited[start]:
            continue
        visited[start] = True
        stack = [np.array(start, dtype=np.int64)]
        index_sum = np.zeros(3)
        weight_sum = 0.0
        count = 0
        while stack:
            vox = stack.pop()
            w = float(values[tuple(vox)]) if weighted else 1.0
            index_sum += w * vox
            weight_sum += w
            count += 1
            neigh = vox + _NEIGHBOR_OFFSETS
            ok = np.all((neigh >= 0) & (neigh < dims), axis=1)
            for nb in neigh[ok]:
                t = tuple(nb)
                if mask[t] and not visited[t]:
                    visited[t] = True
                    stack.append(nb)
        positions.append(np.array(spec.origin) + spec.resolution * index_sum / weight_sum)
        sizes.append(count)
    if not positions:
        return np.zeros((0, 3)), []
    return np.vstack(positions), sizes


def _ball_voxels(spec: GridSpec, centers: np.ndarray, radius: float) -> np.ndarray:
    """Flat indices of voxels within `radius` of any center."""
    dims = spec.dims
    res = spec.resolution
    origin = np.array(spec.origin)
    found: list[np.ndarray] = []
    for c in centers:
        lo = np.maximum(np.ceil((c - radius - origin) / res).astype(int), 0)
        hi = np.minimum(np.floor((c + radius - origin) / res).astype(int), np.array(dims) - 1)
        if np.any(lo > hi):
            continue
        axes = [np.arange(lo[ax], hi[ax] + 1) for ax in range(3)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        coords = origin + res * grid
        within = np.sum((coords - c) ** 2, axis=1) <= radius * radius
        found.append(np.ravel_multi_index(grid[within].T, dims))
    if not found:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(found))


def _channel_setup(
    field: FieldTensor,
    channel: str,
    centers: np.ndarray,
    params: RbfParams,
    window_sigmas: float,
):
    """Window coordinates and field values for one channel's centers."""
    spec = field.spec
    sigma = params.sigma_for(channel)
    flat = _ball_voxels(spec, centers, window_sigmas * sigma)
    if flat.size == 0:
        return None
    idx = np.stack(np.unravel_index(flat, spec.dims), axis=1)
    coords = np.array(spec.origin) + spec.resolution * idx
    values = field.channel(channel).reshape(-1)[flat]
    return coords, values, sigma


def position_loss_grad(
    groups: list[tuple[np.ndarray, np.ndarray, float, float, np.ndarray]],
    positions: np.ndarray,
    n_grid: int,
) -> tuple[float, np.ndarray]:
    """Per-channel grid-mean squared residual and its position gradient.

    `groups` carries per-channel (coords, values, sigma, amplitude,
    atom index array); residuals couple only atoms of the same channel.
    `n_grid` is the voxel count of one channel.
    """
    loss = 0.0
    grads = np.zeros_like(positions)
    for coords, values, sigma, amplitude, atom_idx in groups:
        centers = positions[atom_idx]
        diff = centers[:, None, :] - coords[None, :, :]
        e = np.exp(-np.sum(diff**2, axis=2) / (2.0 * sigma * sigma))
        resid = values - amplitude * e.sum(axis=0)
        loss += float(np.sum(resid**2))
        w = resid[None, :] * e
        grad = -(2.0 * amplitude / (sigma * sigma)) * (
            w @ coords - w.sum(axis=1)[:, None] * centers
        )
        grads[atom_idx] += grad
    return loss / n_grid, grads / n_grid


def refine_positions(
    field: FieldTensor,
    channels: list[str],
    positions: np.ndarray,
    params: RbfParams = RbfParams(),
    config: ExtractionConfig = ExtractionConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient-descend atom positions against the atom channels.

    Types and atom count stay fixed; only positions move. Returns refined
    positions and the per-iteration loss trace (length iterations + 1).
    """
    positions = np.array(positions, dtype=np.float64)
    groups = []
    for name in field.atom_channels:
        atom_idx = np.array([k for k, ch in enumerate(channels) if ch == name], dtype=np.int64)
        if atom_idx.size == 0:
            continue
        setup = _channel_setup(field, name, positions[atom_idx], params, config.window_sigmas)
        if setup is None:
            continue
        coords, values, sigma = setup
        groups.append((coords, values, sigma, params.amplitude_for(name), atom_idx))
    if not groups:
        return positions, np.zeros(1)
    n_grid = int(np.prod(field.spec.dims))

    losses = np.zeros(config.opt_iterations + 1)
    for it in range(config.opt_iterations):
        loss, grads = position_loss_grad(groups, positions, n_grid)
        if not np.isfinite(loss):
            raise RuntimeError(f"position refinement diverged at iteration {it}")
        losses[it] = loss
        positions -= config.opt_learning_rate * grads
    losses[-1], _ = position_loss_grad(groups, positions, n_grid)
    if not np.isfinite(losses[-1]):
        raise RuntimeError("position refinement diverged")
    return positions, losses


def candidate_bonds(
    channels: list[str],
    positions: np.ndarray,
    field: FieldTensor,
    config: ExtractionConfig = ExtractionConfig(),
) -> list[tuple[int, int, tuple[int, ...]]]:
    """Screened atom pairs with the bond orders whose probe sets are nonempty.

    A pair is screened when its distance is below the tabulated maximum
    covalent length plus the margin d1; order b is a candidate when some
    voxel within d2 of the midpoint has bond-channel value above r.
    """
    spec = field.spec
    out: list[tuple[int, int, tuple[int, ...]]] = []
    n = len(channels)
    for i in range(n):
        for j in range(i + 1, n):
            dist = float(np.linalg.norm(positions[i] - positions[j]))
            if dist >= max_bond_length(channels[i], channels[j]) + config.bond_margin:
                continue
            midpoint = (positions[i] + positions[j]) / 2.0
            flat = _ball_voxels(spec, midpoint[None, :], config.bond_probe_radius)
            if flat.size == 0:
                continue
            orders = []
            for order in (1, 2, 3):
                probe = field.bond_channel(order).reshape(-1)[flat]
                if np.any(probe > config.bond_value_threshold):
                    orders.append(order)
            if orders:
                out.append((i, j, tuple(orders)))
    return out


def gamma_loss_grad(
    groups: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    gammas: np.ndarray,
    n_active: int,
) -> tuple[float, np.ndarray]:
    """Mean squared residual over bond windows and its gradient in gamma.

    `groups` carries per-bond-channel (component matrix E, window values,
    candidate index array); the model is values ~ E^T gamma.
    """
    loss = 0.0
    grads = np.zeros_like(gammas)
    for e, values, cand_idx in groups:
        resid = values - gammas[cand_idx] @ e
        loss += float(np.sum(resid**2))
        grads[cand_idx] += -2.0 * (e @ resid)
    return loss / n_active, grads / n_active


def optimize_bond_amplitudes(
    field: FieldTensor,
    bond_candidates: list[tuple[int, int, int]],
    positions: np.ndarray,
    params: RbfParams = RbfParams(),
    config: ExtractionConfig = ExtractionConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Fit per-candidate amplitudes gamma (initialized at 1) to the bond fields.

    Midpoints stay fixed; candidates without field support optimize toward 0.
    Returns gammas aligned with `bond_candidates` plus the loss trace.
    """
    if not bond_candidates:
        return np.zeros(0), np.zeros(1)
    midpoints = np.array(
        [(positions[i] + positions[j]) / 2.0 for i, j, _ in bond_candidates]
    )
    groups = []
    n_active = 0
    for order in (1, 2, 3):
        name = field.bond_channels[order - 1]
        cand_idx = np.array(
            [k for k, (_, _, o) in enumerate(bond_candidates) if o == order],
            dtype=np.int64,
        )
        if cand_idx.size == 0:
            continue
        setup = _channel_setup(field, name, midpoints[cand_idx], params, config.window_sigmas)
        if setup is None:
            continue
        coords, values, sigma = setup
        diff = midpoints[cand_idx][:, None, :] - coords[None, :, :]
        e = params.amplitude_for(name) * np.exp(
            -np.sum(diff**2, axis=2) / (2.0 * sigma * sigma)
        )
        groups.append((e, values, cand_idx))
        n_active += values.size
    gammas = np.ones(len(bond_candidates))
    if not groups:
        return gammas, np.zeros(1)

    losses = np.zeros(config.opt_iterations + 1)
    for it in range(config.opt_iterations):
        loss, grads = gamma_loss_grad(groups, gammas, n_active)
        if not np.isfinite(loss):
            raise RuntimeError(f"gamma optimization diverged at iteration {it}")
        losses[it] = loss
        gammas -= config.opt_learning_rate * grads
    losses[-1], _ = gamma_loss_grad(groups, gammas, n_active)
    if not np.isfinite(losses[-1]):
        raise RuntimeError("gamma optimization diverged")
    return gammas, losses


def extract_molecule(
    field: FieldTensor,
    config: ExtractionConfig = ExtractionConfig(),
    params: RbfParams = RbfParams(),
) -> ExtractionResult:
    """Run the four-stage pipeline and assemble the recovered molecule."""
    channels: list[str] = []
    init_positions: list[np.ndarray] = []
    sizes: list[int] = []
    for name in field.atom_channels:
        peaks, counts = peak_extract(
            field.channel(name), config.peak_threshold, field.spec, config.weighted_peak_mean
        )
        for k in range(peaks.shape[0]):
            channels.append(name)
            init_positions.append(peaks[k])
        sizes.extend(counts)
    if not channels:
        empty = Molecule((), np.zeros((0, 3)), ())
        return ExtractionResult(empty, [], [], np.zeros(0), [], (0.0, 0.0), (0.0, 0.0))

    positions, pos_losses = refine_positions(
        field, channels, np.vstack(init_positions), params, config
    )
    pair_candidates = candidate_bonds(channels, positions, field, config)
    expanded = [(i, j, o) for i, j, orders in pair_candidates for o in orders]
    if config.optimize_gammas:
        gammas, gamma_losses = optimize_bond_amplitudes(field, expanded, positions, params, config)
    else:
        gammas, gamma_losses = np.ones(len(expanded)), np.zeros(1)

    best: dict[tuple[int, int], tuple[int, float]] = {}
    removed: list[tuple[int, int, int]] = []
    for (i, j, order), gamma in zip(expanded, gammas):
        if gamma >= config.gamma_keep_threshold:
            prev = best.get((i, j))
            if prev is None or gamma > prev[1]:
                if prev is not None:
                    removed.append((i, j, prev[0]))
                best[(i, j)] = (order, float(gamma))
            else:
                removed.append((i, j, order))
        else:
            removed.append((i, j, order))
    bonds = tuple((i, j, order) for (i, j), (order, _) in sorted(best.items()))
    molecule = Molecule(tuple(channels), positions, bonds)
    return ExtractionResult(
        molecule,
        sizes,
        expanded,
        gammas,
        removed,
        (float(pos_losses[0]), float(pos_losses[-1])),
        (float(gamma_losses[0]), float(gamma_losses[-1])),
    )
