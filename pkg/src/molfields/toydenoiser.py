"""A small fully-connected noise predictor with hand-written gradients.

Stands in for a full 3D U-Net at toy grid sizes. Input is the flattened
field concatenated with a sinusoidal time embedding and a learned atom-count
embedding; a scalar property condition shift-scales the first hidden layer.
Two tanh hidden layers keep the network smooth so analytic gradients can be
validated against central finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .diffusion import Condition
from .grid import FieldTensor, GridSpec, _split_channels
from .schedule import NoiseSchedule

FMGD_MAGIC = b"FMGD"
FMGD_VERSION = 1


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"loss became non-finite at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class ToyNetConfig:
    hidden: int = 32
    n_freq: int = 4
    count_emb_dim: int = 8
    max_count: int = 64


@dataclass(frozen=True)
class ToyTrainConfig:
    iterations: int = 2000
    learning_rate: float = 1e-3
    batch_size: int = 4
    cond_drop: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8


_PARAM_ORDER = ("W1", "b1", "gs", "gb", "W2", "b2", "W3", "b3", "emb")


class ToyDenoiser:
    def __init__(
        self,
        template: FieldTensor,
        steps: int,
        config: ToyNetConfig = ToyNetConfig(),
        params: dict[str, np.ndarray] | None = None,
        seed: int = 0,
    ):
        self.template = template.zeros_like()
        self.steps = steps
        self.config = config
        self.n_out = int(np.prod(template.data.shape))
        self.n_in = self.n_out + 2 * config.n_freq + config.count_emb_dim
        self.params = params if params is not None else self._init_params(seed)

    def _init_params(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        h = self.config.hidden

        def mat(n_in: int, n_out: int) -> np.ndarray:
            return rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)

        return {
            "W1": mat(self.n_in, h),
            "b1": np.zeros(h),
            "gs": np.zeros(h),
            "gb": np.zeros(h),
            "W2": mat(h, h),
            "b2": np.zeros(h),
            "W3": mat(h, self.n_out),
            "b3": np.zeros(self.n_out),
            "emb": 0.1 * rng.standard_normal((self.config.max_count + 1, self.config.count_emb_dim)),
        }

    def _time_embedding(self, step: int) -> np.ndarray:
        t = step / self.steps
        freqs = 2.0 ** np.arange(self.config.n_freq)
        return np.concatenate([np.sin(np.pi * freqs * t), np.cos(np.pi * freqs * t)])

    def _cond_inputs(self, cond: Condition | None) -> tuple[int, float]:
        if cond is None or cond.atom_count is None:
            row = 0
        else:
            row = min(cond.atom_count, self.config.max_count)
        c = 0.0 if cond is None or cond.prop is None else float(cond.prop)
        return row, c

    def _forward(self, u_flat: np.ndarray, step: int, cond: Condition | None):
        p = self.params
        row, c = self._cond_inputs(cond)
        x = np.concatenate([u_flat, self._time_embedding(step), p["emb"][row]])
        h1 = np.tanh(x @ p["W1"] + p["b1"])
        h1s = h1 * (1.0 + c * p["gs"]) + c * p["gb"]
        h2 = np.tanh(h1s @ p["W2"] + p["b2"])
        out = h2 @ p["W3"] + p["b3"]
        return out, (x, h1, h1s, h2, row, c)

    def predict_noise(
        self, u_t: FieldTensor, step: int, cond: Condition | None = None
    ) -> FieldTensor:
        out, _ = self._forward(u_t.data.reshape(-1), step, cond)
        return u_t.like(out.reshape(u_t.data.shape))

    def loss_and_grads(
        self,
        u_t_flat: np.ndarray,
        eps_flat: np.ndarray,
        step: int,
        cond: Condition | None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Squared-error loss (mean over output dims) and parameter gradients."""
        p = self.params
        out, (x, h1, h1s, h2, row, c) = self._forward(u_t_flat, step, cond)
        resid = out - eps_flat
        loss = float(np.mean(resid**2))

        d_out = 2.0 * resid / self.n_out
        g: dict[str, np.ndarray] = {}
        g["W3"] = np.outer(h2, d_out)
        g["b3"] = d_out
        d_h2 = d_out @ p["W3"].T
        d_h2pre = d_h2 * (1.0 - h2**2)
        g["W2"] = np.outer(h1s, d_h2pre)
        g["b2"] = d_h2pre
        d_h1s = d_h2pre @ p["W2"].T
        g["gs"] = d_h1s * h1 * c
        g["gb"] = d_h1s * c
        d_h1 = d_h1s * (1.0 + c * p["gs"])
        d_h1pre = d_h1 * (1.0 - h1**2)
        g["W1"] = np.outer(x, d_h1pre)
        g["b1"] = d_h1pre
        d_x = d_h1pre @ p["W1"].T
        g["emb"] = np.zeros_like(p["emb"])
        g["emb"][row] = d_x[self.n_out + 2 * self.config.n_freq :]
        return loss, g

    # Flat parameter views used by the finite-difference gradient oracle.
    def flat_params(self) -> np.ndarray:
        return np.concatenate([self.params[k].reshape(-1) for k in _PARAM_ORDER])

    def set_flat_params(self, vec: np.ndarray) -> None:
        pos = 0
        for k in _PARAM_ORDER:
            size = self.params[k].size
            self.params[k] = vec[pos : pos + size].reshape(self.params[k].shape).copy()
            pos += size

    def flat_grads(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([grads[k].reshape(-1) for k in _PARAM_ORDER])


def train_toy_denoiser(
    dataset: list[FieldTensor],
    schedule: NoiseSchedule,
    config: ToyTrainConfig = ToyTrainConfig(),
    net_config: ToyNetConfig = ToyNetConfig(),
    conditions: list[Condition] | None = None,
    seed: int = 0,
) -> tuple[ToyDenoiser, np.ndarray]:
    """Minimize the noise-prediction loss with Adam; returns the model and loss trace.

    Each iteration draws (dataset element, step ~ U{1..T}, standard-normal
    noise) combinations; with probability cond_drop the element's condition
    is replaced by the null condition so unconditional estimates stay trained
    for classifier-free guidance.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    if conditions is not None and len(conditions) != len(dataset):
        raise ValueError("conditions length must match dataset length")
    rng = np.random.default_rng(seed)
    model = ToyDenoiser(dataset[0], schedule.steps, net_config, seed=seed)
    stacks = [f.data.reshape(-1) for f in dataset]
    n_atom = len(dataset[0].atom_channels)
    n_bond = len(dataset[0].bond_channels)
    shape = dataset[0].data.shape

    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(vv) for k, vv in model.params.items()}
    trace = np.zeros(config.iterations)
    b1, b2 = config.adam_beta1, config.adam_beta2

    for it in range(config.iterations):
        grads = {k: np.zeros_like(p) for k, p in model.params.items()}
        batch_loss = 0.0
        for _ in range(config.batch_size):
            idx = int(rng.integers(len(dataset)))
            step = int(rng.integers(1, schedule.steps + 1))
            eps = rng.standard_normal(shape)
            alpha, sigma = schedule.per_channel_alpha_sigma(step, n_atom, n_bond)
            u_t = (alpha * dataset[idx].data + sigma * eps).reshape(-1)
            cond = conditions[idx] if conditions is not None else None
            if cond is not None and rng.random() < config.cond_drop:
                cond = None
            loss, g = model.loss_and_grads(u_t, eps.reshape(-1), step, cond)
            batch_loss += loss
            for k in grads:
                grads[k] += g[k]
        batch_loss /= config.batch_size
        if not np.isfinite(batch_loss):
            raise TrainingDivergedError(it)
        trace[it] = batch_loss
        for k in grads:
            grads[k] /= config.batch_size
            m[k] = b1 * m[k] + (1 - b1) * grads[k]
            v[k] = b2 * v[k] + (1 - b2) * grads[k] ** 2
            m_hat = m[k] / (1 - b1 ** (it + 1))
            v_hat = v[k] / (1 - b2 ** (it + 1))
            model.params[k] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return model, trace


def write_loss_trace(path: str, trace: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,loss\n")
        for i, loss in enumerate(trace):
            fh.write(f"{i},{loss!r}\n")


def _write_array(stream: BinaryIO, name: str, arr: np.ndarray) -> None:
    raw = name.encode("ascii")
    stream.write(struct.pack("<I", len(raw)))
    stream.write(raw)
    stream.write(struct.pack("<I", arr.ndim))
    stream.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    stream.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(stream: BinaryIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", stream.read(4))
    name = stream.read(name_len).decode("ascii")
    (ndim,) = struct.unpack("<I", stream.read(4))
    shape = struct.unpack(f"<{ndim}I", stream.read(4 * ndim))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(stream.read(8 * count), dtype="<f8").reshape(shape).copy()
    return name, data


def save_fmgd(path: str, model: ToyDenoiser) -> None:
    """Versioned binary parameter file: magic 'FMGD', geometry, sizes, f64 arrays."""
    t = model.template
    with open(path, "wb") as fh:
        fh.write(FMGD_MAGIC)
        fh.write(struct.pack("<2I", FMGD_VERSION, model.steps))
        fh.write(struct.pack("<4I", t.n_channels, *t.spec.dims))
        fh.write(struct.pack("<4d", t.spec.resolution, *t.spec.origin))
        for name in t.channels:
            raw = name.encode("ascii")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        cfg = model.config
        fh.write(struct.pack("<4I", cfg.hidden, cfg.n_freq, cfg.count_emb_dim, cfg.max_count))
        fh.write(struct.pack("<I", len(_PARAM_ORDER)))
        for k in _PARAM_ORDER:
            _write_array(fh, k, model.params[k])


def load_fmgd(path: str) -> ToyDenoiser:
    with open(path, "rb") as fh:
        if fh.read(4) != FMGD_MAGIC:
            raise ValueError("bad FMGD magic")
        version, steps = struct.unpack("<2I", fh.read(8))
        if version != FMGD_VERSION:
            raise ValueError(f"unsupported FMGD version {version}")
        k, h, w, d = struct.unpack("<4I", fh.read(16))
        resolution, ox, oy, oz = struct.unpack("<4d", fh.read(32))
        names = []
        for _ in range(k):
            (length,) = struct.unpack("<I", fh.read(4))
            names.append(fh.read(length).decode("ascii"))
        hidden, n_freq, emb_dim, max_count = struct.unpack("<4I", fh.read(16))
        (n_arrays,) = struct.unpack("<I", fh.read(4))
        params = dict(_read_array(fh) for _ in range(n_arrays))
    atoms, bonds = _split_channels(names)
    spec = GridSpec((h, w, d), resolution, (ox, oy, oz))
    template = FieldTensor(spec, atoms, bonds, np.zeros((k, h, w, d)))
    config = ToyNetConfig(hidden, n_freq, emb_dim, max_count)
    return ToyDenoiser(template, steps, config, params=params)
