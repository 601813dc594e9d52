"""Discrete variance-preserving noise schedules with separate atom/bond tables.

The signal amplitude follows alpha(t) = cos(pi/2 * (t+s)^nu / (1+s))^2 on the
grid t = k/T, with sigma(t) = sqrt(1 - alpha(t)^2) so that
alpha^2 + sigma^2 = 1 at every step. The cosine argument is clamped at pi/2:
for nu > 1 the raw argument overshoots pi/2 just before t = 1, which would
make alpha rise again; clamping pins alpha(1) = 0 exactly.

With the defaults nu_atoms = 1 and nu_bonds = 1.5, bond channels keep more
signal than atom channels at every interior step, so the reverse process
resolves bonds earlier than atoms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_STEPS = 100
DEFAULT_NU_ATOMS = 1.0
DEFAULT_NU_BONDS = 1.5
DEFAULT_OFFSET = 0.008


@dataclass(frozen=True, eq=False)
class GroupSchedule:
    """Alpha/sigma tables for one channel group over steps 0..T."""

    nu: float
    offset: float
    alpha: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    steps: int
    atoms: GroupSchedule
    bonds: GroupSchedule

    def group(self, bond: bool) -> GroupSchedule:
        return self.bonds if bond else self.atoms

    def per_channel_alpha_sigma(
        self, step: int, n_atom_channels: int, n_bond_channels: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable (K,1,1,1) alpha and sigma vectors for one step."""
        alpha = np.concatenate(
            [
                np.full(n_atom_channels, self.atoms.alpha[step]),
                np.full(n_bond_channels, self.bonds.alpha[step]),
            ]
        )
        sigma = np.concatenate(
            [
                np.full(n_atom_channels, self.atoms.sigma[step]),
                np.full(n_bond_channels, self.bonds.sigma[step]),
            ]
        )
        return alpha.reshape(-1, 1, 1, 1), sigma.reshape(-1, 1, 1, 1)


def cosine_alpha(t: np.ndarray | float, nu: float, s: float) -> np.ndarray:
    """The schedule formula with its argument clamped to [0, pi/2]."""
    arg = np.minimum(np.pi / 2.0, (np.pi / 2.0) * (np.asarray(t, dtype=np.float64) + s) ** nu / (1.0 + s))
    return np.cos(arg) ** 2


def _group(steps: int, nu: float, s: float) -> GroupSchedule:
    t = np.arange(steps + 1, dtype=np.float64) / steps
    alpha = cosine_alpha(t, nu, s)
    alpha[-1] = 0.0
    if np.any(np.diff(alpha) >= 0):
        raise ValueError(
            f"schedule alpha not strictly decreasing for T={steps}, nu={nu}, s={s}"
        )
    sigma = np.sqrt(1.0 - alpha**2)
    return GroupSchedule(nu, s, alpha, sigma)


def build_schedule(
    steps: int = DEFAULT_STEPS,
    nu_atoms: float = DEFAULT_NU_ATOMS,
    nu_bonds: float = DEFAULT_NU_BONDS,
    s: float = DEFAULT_OFFSET,
) -> NoiseSchedule:
    """Build atom and bond alpha/sigma tables on t = k/T, k = 0..T."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not (s > 0 and nu_atoms > 0 and nu_bonds > 0):
        raise ValueError("s and nu must be positive")
    return NoiseSchedule(steps, _group(steps, nu_atoms, s), _group(steps, nu_bonds, s))
