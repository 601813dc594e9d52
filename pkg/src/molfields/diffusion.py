"""Variance-preserving DDPM over field tensors.

Forward process: u_t = alpha_t * u_0 + sigma_t * eps, with channel-group
alpha/sigma (atom channels follow the atom schedule, bond channels the bond
schedule). The reverse process samples the forward posterior
q(u_s | u_t, u_0 := predicted u_0), where the denoiser provides a noise
estimate that is converted through u_0 = u_t / alpha_t - sigma_t * eps / alpha_t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .grid import FieldTensor
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class Condition:
    """Optional conditioning: target atom count and/or a scalar property."""

    atom_count: int | None = None
    prop: float | None = None

    def __post_init__(self) -> None:
        if self.atom_count is not None and self.atom_count < 1:
            raise ValueError("atom_count must be >= 1 when present")

    @property
    def is_null(self) -> bool:
        return self.atom_count is None and self.prop is None


NULL_CONDITION = Condition()


class Denoiser(Protocol):
    """Noise predictor contract: deterministic, shape-preserving, finite output.

    `template` exposes the field geometry the denoiser was built for; the
    sampler uses it to draw the prior.
    """

    template: FieldTensor

    def predict_noise(
        self, u_t: FieldTensor, step: int, cond: Condition | None = None
    ) -> FieldTensor: ...


def _alphas(field: FieldTensor, schedule: NoiseSchedule, step: int):
    return schedule.per_channel_alpha_sigma(
        step, len(field.atom_channels), len(field.bond_channels)
    )


def forward_sample(
    u0: FieldTensor, step: int, schedule: NoiseSchedule, noise: FieldTensor
) -> FieldTensor:
    """Draw u_step = alpha * u0 + sigma * noise, channel-group-wise."""
    if noise.data.shape != u0.data.shape:
        raise ValueError("noise shape does not match field shape")
    alpha, sigma = _alphas(u0, schedule, step)
    return u0.like(alpha * u0.data + sigma * noise.data)


def posterior_params(
    u_t: FieldTensor,
    u0_hat: FieldTensor,
    s: int,
    t: int,
    schedule: NoiseSchedule,
) -> tuple[FieldTensor, np.ndarray]:
    """Mean and per-channel std of q(u_s | u_t, u_0 = u0_hat) for steps s < t.

    mean = (alpha_ts sigma_s^2 / sigma_t^2) u_t + (alpha_s sigma_ts^2 / sigma_t^2) u0_hat
    var  = sigma_ts^2 sigma_s^2 / sigma_t^2
    with alpha_ts = alpha_t / alpha_s and sigma_ts^2 = sigma_t^2 - alpha_ts^2 sigma_s^2.
    """
    if not 0 <= s < t <= schedule.steps:
        raise ValueError(f"need 0 <= s < t <= T, got s={s}, t={t}")
    if u_t.data.shape != u0_hat.data.shape:
        raise ValueError("field shapes do not match")
    a_s, s_s = _alphas(u_t, schedule, s)
    a_t, s_t = _alphas(u_t, schedule, t)
    if np.any(a_s == 0):
        raise ValueError("posterior requires alpha_s > 0")
    a_ts = a_t / a_s
    var_ts = s_t**2 - a_ts**2 * s_s**2
    coef_t = a_ts * s_s**2 / s_t**2
    coef_0 = a_s * var_ts / s_t**2
    mean = u_t.like(coef_t * u_t.data + coef_0 * u0_hat.data)
    std = np.sqrt(var_ts * s_s**2 / s_t**2)
    return mean, std


def predicted_u0(
    u_t: FieldTensor, eps_hat: FieldTensor, step: int, schedule: NoiseSchedule
) -> FieldTensor:
    """Invert the forward draw: u0 = u_t / alpha - sigma * eps_hat / alpha."""
    alpha, sigma = _alphas(u_t, schedule, step)
    if np.any(alpha == 0):
        raise ValueError(f"alpha is zero at step {step}; cannot invert at t = 1")
    return u_t.like((u_t.data - sigma * eps_hat.data) / alpha)


def guided_noise(
    eps_cond: FieldTensor, eps_uncond: FieldTensor, beta: float
) -> FieldTensor:
    """Classifier-free guidance: (1 + beta) * eps_cond - beta * eps_uncond."""
    if eps_cond.data.shape != eps_uncond.data.shape:
        raise ValueError("field shapes do not match")
    return eps_cond.like((1.0 + beta) * eps_cond.data - beta * eps_uncond.data)


def sample(
    denoiser: Denoiser,
    schedule: NoiseSchedule,
    cond: Condition | None = None,
    beta: float = 0.0,
    seed: int | np.random.Generator = 0,
    snapshot_stride: int | None = None,
) -> FieldTensor | tuple[FieldTensor, list[tuple[int, FieldTensor]]]:
    """Run the reverse process from a standard-normal prior draw.

    The first transition queries the denoiser one step in (alpha vanishes at
    t = 1); the last transition emits the predicted u_0, i.e. the posterior
    mean in its zero-noise sigma_0 -> 0 limit. Deterministic given the seed.
    When snapshot_stride is set, also returns (step, state) pairs every
    `stride` steps for schedule inspection.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    template = denoiser.template
    u = template.like(rng.standard_normal(template.data.shape))
    use_guidance = cond is not None and not cond.is_null and beta != 0.0
    snapshots: list[tuple[int, FieldTensor]] = []
    T = schedule.steps
    for t in range(T, 0, -1):
        query_step = min(t, T - 1) if T > 1 else t - 1
        eps = denoiser.predict_noise(u, query_step, cond)
        if use_guidance:
            eps_uncond = denoiser.predict_noise(u, query_step, NULL_CONDITION)
            eps = guided_noise(eps, eps_uncond, beta)
        u0_hat = predicted_u0(u, eps, query_step, schedule)
        if t == 1:
            u = u0_hat
        else:
            mean, std = posterior_params(u, u0_hat, t - 1, t, schedule)
            u = u.like(mean.data + std * rng.standard_normal(u.data.shape))
        if snapshot_stride and (t - 1) % snapshot_stride == 0:
            snapshots.append((t - 1, u))
    if snapshot_stride:
        return u, snapshots
    return u
