"""Linear probe on scattering features, sign-gradient attacks, and
angular-frequency analysis/sparsification of the trained weights.

The probe is multinomial logistic regression over standardized features.
Standardization statistics are computed per (channel, path) on the
training set and stored with the model, so prediction is self-contained.

The angular analysis Fourier-transforms the order-1 weight block along its
angle index and the order-2 block along both angle indices (orthonormal
DFT, so summed spectral energy equals the analyzed block's squared norm)
and reports energy per angular frequency.  Energy concentrated at low
frequency means the operator is smooth along wavelet orientation, i.e. it
builds invariance to local rotations.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .adjoint import backward, transform_with_tape
from .errors import InvalidInputError
from .filterbank import FilterBank
from .grid import ImageGrid
from .scattering import (
    PathIndex,
    ScatteringCoeffs,
    ScatteringConfig,
    transform_image,
)


@dataclass
class LinearModel:
    """Per-class affine scores over standardized scattering features."""

    weights: np.ndarray  # (classes, channels, paths, h, w)
    bias: np.ndarray  # (classes,)
    J: int
    L: int
    paths: tuple[PathIndex, ...]
    feat_mean: np.ndarray  # (channels, paths)
    feat_scale: np.ndarray  # (channels, paths)

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    @property
    def channels(self) -> int:
        return self.weights.shape[1]

    @property
    def spatial(self) -> int:
        return self.weights.shape[3]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 64
    step: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4


def _standardize(data: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return (data - mean[..., None, None]) / scale[..., None, None]


def train_linear(
    features: list[tuple[ScatteringCoeffs, int]],
    classes: int,
    cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> LinearModel:
    """Mini-batch gradient descent with momentum on the cross-entropy loss."""
    if not features:
        raise InvalidInputError("empty training set")
    shape = features[0][0].data.shape
    for coeffs, label in features:
        if coeffs.data.shape != shape:
            raise InvalidInputError("feature shapes must be homogeneous")
        if not (0 <= label < classes):
            raise InvalidInputError(f"label {label} out of range for {classes} classes")
    first = features[0][0]
    X = np.stack([c.data for c, _ in features]).astype(np.float64)
    y = np.array([lab for _, lab in features])
    n, C, P, h, w = X.shape

    mean = X.mean(axis=(0, 3, 4))
    scale = np.maximum(X.std(axis=(0, 3, 4)), 1e-8)
    Xs = _standardize(X, mean, scale).reshape(n, -1)

    D = Xs.shape[1]
    W = np.zeros((classes, D))
    b = np.zeros(classes)
    vel_w = np.zeros_like(W)
    vel_b = np.zeros_like(b)
    onehot = np.eye(classes)[y]

    rng = np.random.default_rng(seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            Xb, Yb = Xs[idx], onehot[idx]
            scores = Xb @ W.T + b
            scores -= scores.max(axis=1, keepdims=True)
            p = np.exp(scores)
            p /= p.sum(axis=1, keepdims=True)
            resid = (p - Yb) / len(idx)
            grad_w = resid.T @ Xb + cfg.weight_decay * W
            grad_b = resid.sum(axis=0)
            vel_w = cfg.momentum * vel_w - cfg.step * grad_w
            vel_b = cfg.momentum * vel_b - cfg.step * grad_b
            W += vel_w
            b += vel_b

    return LinearModel(
        weights=W.reshape(classes, C, P, h, w).astype(np.float32),
        bias=b.astype(np.float32),
        J=first.J,
        L=first.L,
        paths=first.paths,
        feat_mean=mean.astype(np.float32),
        feat_scale=scale.astype(np.float32),
    )


def scores_for(model: LinearModel, coeffs: ScatteringCoeffs) -> np.ndarray:
    expected = model.weights.shape[1:]
    if coeffs.data.shape != expected:
        raise InvalidInputError(
            f"feature shape {coeffs.data.shape} does not match model {expected}"
        )
    feat = _standardize(
        coeffs.data.astype(np.float64),
        model.feat_mean.astype(np.float64),
        model.feat_scale.astype(np.float64),
    )
    flat = model.weights.reshape(model.classes, -1).astype(np.float64)
    return flat @ feat.ravel() + model.bias.astype(np.float64)


def predict(model: LinearModel, coeffs: ScatteringCoeffs) -> tuple[int, np.ndarray]:
    """Argmax class and the score vector; ties break to the lowest index."""
    scores = scores_for(model, coeffs)
    return int(np.argmax(scores)), scores


def fgsm_attack(
    model: LinearModel,
    fb: FilterBank | None,
    cfg_scat: ScatteringConfig,
    x: ImageGrid,
    target_class: int | None,
    eps_grid,
) -> tuple[float | None, ImageGrid | None]:
    """Sign-gradient attack along the score-difference gradient.

    Targeted (default): perturbs along sign(d(score_target - score_current)/dx)
    and succeeds when the clamped perturbation is classified as the target.
    ``target_class=None`` runs the untargeted variant, descending the current
    class's score until any other class wins.  Returns the first step size of
    the ascending grid that succeeds, or (None, None) when it is exhausted.
    """
    coeffs, tape = transform_with_tape(x, cfg_scat, fb)
    current, _ = predict(model, coeffs)
    if target_class is not None:
        if not (0 <= target_class < model.classes):
            raise InvalidInputError("target class out of range")
        if current == target_class:
            raise InvalidInputError("image is already classified as the target class")
        ct = (model.weights[target_class] - model.weights[current]).astype(np.float64)
    else:
        ct = -model.weights[current].astype(np.float64)
    ct = ct / model.feat_scale.astype(np.float64)[..., None, None]
    grad = backward(tape, ct.astype(cfg_scat.real_dtype))
    tape.release()
    direction = np.sign(grad.data)

    eps_list = [float(e) for e in eps_grid]
    if any(b <= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidInputError("eps grid must be strictly ascending")
    for eps in eps_list:
        candidate = np.clip(x.data + eps * direction, 0.0, 1.0).astype(x.data.dtype)
        img = ImageGrid(candidate, x.color_space)
        adv_coeffs, _ = transform_image(img, cfg_scat, fb)
        hit = predict(model, adv_coeffs)[0]
        if (hit == target_class) if target_class is not None else (hit != current):
            return eps, img
    return None, None


# ---------------------------------------------------------------------------
# Angular-frequency analysis

@dataclass(frozen=True)
class AngularSpectrum:
    """Energy per angular frequency: omega1 has length L, omega2 is LxL."""

    omega1: np.ndarray
    omega2: np.ndarray


def _unit_normalized_rows(model: LinearModel) -> np.ndarray:
    w = model.weights.astype(np.float64)
    norms = np.sqrt((w.reshape(model.classes, -1) ** 2).sum(axis=1))
    norms = np.maximum(norms, 1e-30)
    return w / norms[:, None, None, None, None]


def _order1_block(model: LinearModel, w: np.ndarray) -> np.ndarray:
    """(classes, channels, J, L, h, w) view of the order-1 rows."""
    J, L = model.J, model.L
    rows = [i for i, p in enumerate(model.paths) if p.order == 1]
    block = w[:, :, rows]
    K, C, _, h, ww = block.shape
    return block.reshape(K, C, J, L, h, ww)


def _order2_block(model: LinearModel, w: np.ndarray) -> np.ndarray:
    """(classes, channels, pairs, L, L, h, w) gather of the order-2 rows."""
    L = model.L
    index = {p: i for i, p in enumerate(model.paths)}
    pairs = sorted({(p.j1, p.j2) for p in model.paths if p.order == 2})
    if not pairs:
        return np.zeros((w.shape[0], w.shape[1], 0, L, L) + w.shape[3:], w.dtype)
    idx = np.empty((len(pairs), L, L), np.intp)
    for a, (j1, j2) in enumerate(pairs):
        for l1 in range(L):
            for l2 in range(L):
                idx[a, l1, l2] = index[PathIndex(2, j1, l1, j2, l2)]
    return w[:, :, idx]


def angular_spectrum(model: LinearModel) -> AngularSpectrum:
    """Energy of the weight operator per discrete frequency along the
    wavelet angle indices, computed on unit-normalized class filters."""
    w = _unit_normalized_rows(model)
    b1 = _order1_block(model, w)
    f1 = np.fft.fft(b1, axis=3, norm="ortho")
    omega1 = (np.abs(f1) ** 2).sum(axis=(0, 1, 2, 4, 5))
    b2 = _order2_block(model, w)
    f2 = np.fft.fft2(b2, axes=(3, 4), norm="ortho")
    omega2 = (np.abs(f2) ** 2).sum(axis=(0, 1, 2, 5, 6))
    return AngularSpectrum(omega1, omega2)


def spectral_flatness(values: np.ndarray) -> float:
    """Geometric over arithmetic mean; 1 is flat, small means concentrated."""
    v = np.asarray(values, np.float64).ravel()
    v = np.maximum(v, 1e-300)
    return float(np.exp(np.mean(np.log(v))) / v.mean())


def sparsify_angular(model: LinearModel, keep_fraction: float) -> tuple[LinearModel, dict]:
    """Zero all but the top ``keep_fraction`` of angular-frequency weight
    coefficients (one global magnitude threshold over the order-1 and
    order-2 blocks), then transform back to real weights.

    Conjugate-symmetric bins share a magnitude, so thresholding keeps or
    drops them together and the inverse transform stays real.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise InvalidInputError("keep_fraction must lie in (0, 1]")
    w = model.weights.astype(np.float64)
    b1 = _order1_block(model, w)
    b2 = _order2_block(model, w)
    f1 = np.fft.fft(b1, axis=3, norm="ortho")
    f2 = np.fft.fft2(b2, axes=(3, 4), norm="ortho")

    mags = np.concatenate([np.abs(f1).ravel(), np.abs(f2).ravel()])
    total = mags.size
    energy_total = float((mags**2).sum())
    if keep_fraction < 1.0:
        n_keep = int(keep_fraction * total)
        if n_keep >= total:
            cutoff = -np.inf
        elif n_keep == 0:
            cutoff = np.inf
        else:
            cutoff = np.partition(mags, total - n_keep - 1)[total - n_keep - 1]
        f1 = np.where(np.abs(f1) > cutoff, f1, 0.0)
        f2 = np.where(np.abs(f2) > cutoff, f2, 0.0)

    kept_energy = float((np.abs(f1) ** 2).sum() + (np.abs(f2) ** 2).sum())
    zeroed = int((f1 == 0).sum() + (f2 == 0).sum())

    new_w = w.copy()
    inv1 = np.fft.ifft(f1, axis=3, norm="ortho").real
    rows1 = [i for i, p in enumerate(model.paths) if p.order == 1]
    K, C = model.classes, model.channels
    h = model.spatial
    new_w[:, :, rows1] = inv1.reshape(K, C, len(rows1), h, -1)
    if b2.shape[2]:
        inv2 = np.fft.ifft2(f2, axes=(3, 4), norm="ortho").real
        index = {p: i for i, p in enumerate(model.paths)}
        pairs = sorted({(p.j1, p.j2) for p in model.paths if p.order == 2})
        for a, (j1, j2) in enumerate(pairs):
            for l1 in range(model.L):
                for l2 in range(model.L):
                    new_w[:, :, index[PathIndex(2, j1, l1, j2, l2)]] = inv2[:, :, a, l1, l2]

    stats = {
        "achieved_sparsity": zeroed / total,
        "energy_retained": kept_energy / max(energy_total, 1e-300),
    }
    out = replace(model, weights=new_w.astype(model.weights.dtype))
    return out, stats


# ---------------------------------------------------------------------------
# SLM1 model files

SLM1_MAGIC = b"SLM1"


def write_slm1(path, model: LinearModel) -> None:
    meta = {
        "J": model.J,
        "L": model.L,
        "classes": model.classes,
        "channels": model.channels,
        "spatial": model.spatial,
        "paths": [list(p) for p in model.paths],
        "feat_mean": [float(v) for v in model.feat_mean.ravel()],
        "feat_scale": [float(v) for v in model.feat_scale.ravel()],
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(SLM1_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.weights, "<f4").tobytes())
        fh.write(np.ascontiguousarray(model.bias, "<f4").tobytes())


def read_slm1(path) -> LinearModel:
    raw = Path(path).read_bytes()
    if raw[:4] != SLM1_MAGIC:
        raise InvalidInputError("bad SLM1 magic")
    (hlen,) = struct.unpack("<I", raw[4:8])
    meta = json.loads(raw[8 : 8 + hlen].decode())
    paths = tuple(PathIndex(*p) for p in meta["paths"])
    K, C, S = meta["classes"], meta["channels"], meta["spatial"]
    P = len(paths)
    off = 8 + hlen
    weights = np.frombuffer(raw, "<f4", K * C * P * S * S, off).reshape(K, C, P, S, S)
    bias = np.frombuffer(raw, "<f4", K, off + weights.nbytes)
    return LinearModel(
        weights=weights.copy(),
        bias=bias.copy(),
        J=meta["J"],
        L=meta["L"],
        paths=paths,
        feat_mean=np.array(meta["feat_mean"], np.float32).reshape(C, P),
        feat_scale=np.array(meta["feat_scale"], np.float32).reshape(C, P),
    )
