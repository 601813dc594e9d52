"""Exact Bayes-optimal noise predictor for a finite field dataset.

For a dataset {u^(1), ..., u^(n)} with uniform prior and forward draw
u_t = alpha u^(k) + sigma eps, the posterior over dataset elements is

    w_k  proportional to  exp(-sum_groups |u_t - alpha_g u^(k)_g|^2 / (2 sigma_g^2)),

and the mean-squared-error-optimal noise estimate is

    eps_hat = (u_t - alpha * sum_k w_k u^(k)) / sigma,

applied per channel group. This follows from eps = (u_t - alpha u_0) / sigma
and E[eps | u_t] being linear in E[u_0 | u_t]. Weights are computed in log
space with a log-sum-exp so that small sigma at early steps cannot underflow.
"""

from __future__ import annotations

import numpy as np

from .diffusion import Condition
from .grid import FieldTensor
from .schedule import NoiseSchedule


def _posterior_weights(
    stack: np.ndarray,
    u_t: np.ndarray,
    alpha: np.ndarray,
    sigma: np.ndarray,
) -> np.ndarray:
    diff = u_t[None] - alpha[None] * stack
    log_w = -np.sum(diff**2 / (2.0 * sigma[None] ** 2), axis=(1, 2, 3, 4))
    log_w -= log_w.max()
    w = np.exp(log_w)
    return w / w.sum()


def oracle_predict_noise(
    dataset: list[FieldTensor] | np.ndarray,
    u_t: FieldTensor,
    step: int,
    schedule: NoiseSchedule,
) -> FieldTensor:
    """Posterior-weighted noise estimate over a finite dataset at one step."""
    stack = (
        dataset
        if isinstance(dataset, np.ndarray)
        else np.stack([f.data for f in dataset])
    )
    if stack.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    if stack.shape[1:] != u_t.data.shape:
        raise ValueError("dataset and field shapes do not match")
    alpha, sigma = schedule.per_channel_alpha_sigma(
        step, len(u_t.atom_channels), len(u_t.bond_channels)
    )
    if np.any(sigma == 0):
        raise ValueError(f"sigma is zero at step {step}; oracle needs steps >= 1")
    w = _posterior_weights(stack, u_t.data, alpha, sigma)
    posterior_mean = np.tensordot(w, stack, axes=(0, 0))
    return u_t.like((u_t.data - alpha * posterior_mean) / sigma)


class OracleDenoiser:
    """Denoiser-contract wrapper around `oracle_predict_noise`.

    When built with per-element atom counts, an atom-count condition
    restricts the posterior to matching elements, which is the exact
    conditional analogue (classifier-free guidance then contrasts the
    restricted and unrestricted predictions).
    """

    def __init__(
        self,
        dataset: list[FieldTensor],
        schedule: NoiseSchedule,
        atom_counts: list[int] | None = None,
    ):
        if not dataset:
            raise ValueError("dataset must be nonempty")
        if atom_counts is not None and len(atom_counts) != len(dataset):
            raise ValueError("atom_counts length must match dataset length")
        self._stack = np.stack([f.data for f in dataset])
        self._counts = None if atom_counts is None else np.asarray(atom_counts)
        self._schedule = schedule
        self.template = dataset[0].zeros_like()

    def predict_noise(
        self, u_t: FieldTensor, step: int, cond: Condition | None = None
    ) -> FieldTensor:
        stack = self._stack
        if (
            cond is not None
            and cond.atom_count is not None
            and self._counts is not None
        ):
            mask = self._counts == cond.atom_count
            if mask.any():
                stack = stack[mask]
        return oracle_predict_noise(stack, u_t, step, self._schedule)
