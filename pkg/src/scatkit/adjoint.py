"""Exact reverse-mode derivative (vector-Jacobian product) of the cascade.

The tape retains one spectrum per input channel; every branch intermediate
is recomputed during the backward sweep in the same order and arithmetic
as the forward pass, so the adjoint is exact for the map actually
computed.  Recomputation costs at most one extra forward pass and keeps
peak memory within a small multiple of the tapeless transform.

Gradients are taken with respect to the padded image; when a padding plan
is on the tape, the boundary fold maps them back onto original pixels
(reflected margins add their mirrored contributions, periodic margins
wrap).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .filterbank import FilterBank, build_filterbank
from .fourier import Arena, fft2_inplace, ifft2_inplace
from .grid import BoundaryMode, ColorSpace, ImageGrid, PadPlan, pad, unpad_coeffs
from .scattering import (
    ScatteringCoeffs,
    ScatteringConfig,
    forward,
    path_table,
    plan_for,
    _periodize_into,
)

_EPS_MOD = {np.dtype(np.complex64): 1e-6, np.dtype(np.complex128): 1e-12}


def modulus_eps(dtype) -> float:
    return _EPS_MOD[np.dtype(dtype)]


def modulus_vjp(z: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Adjoint of the pointwise modulus: g * z / max(|z|, eps).

    The guard fixes the subgradient at the origin to zero without
    branching.
    """
    if z.shape != g.shape:
        raise InvalidInputError(f"shape mismatch {z.shape} vs {g.shape}")
    eps = modulus_eps(z.dtype)
    return g * z / np.maximum(np.abs(z), eps)


def periodize_vjp(g: np.ndarray, k: int) -> np.ndarray:
    """Adjoint of spectrum folding: tile over the 2^2k blocks, scale 4^-k."""
    m = g.shape[0]
    if g.ndim != 2 or g.shape[1] != m or (m & (m - 1)):
        raise InvalidInputError(f"expected a square power-of-two grid, got {g.shape}")
    if k < 0:
        raise InvalidInputError("fold exponent must be non-negative")
    if k == 0:
        return g.copy()
    return np.tile(g, (2**k, 2**k)) * (4.0**-k)


def _periodize_vjp_into(g: np.ndarray, k: int, dst: np.ndarray) -> None:
    if k == 0:
        dst[...] = g
        return
    t = g.shape[0]
    dst.reshape(2**k, t, 2**k, t)[...] = g[None, :, None, :]
    dst *= 4.0**-k


@dataclass
class Tape:
    """Retained state of one forward pass: per-channel input spectra plus
    the geometry needed to replay branches and fold boundary gradients."""

    fb: FilterBank
    cfg: ScatteringConfig
    spectra: list[np.ndarray]
    color_space: ColorSpace
    plan: PadPlan | None
    arena: Arena

    @property
    def M(self) -> int:
        return self.spectra[0].shape[-1]

    @property
    def channels(self) -> int:
        return len(self.spectra)

    def release(self) -> None:
        """Return the retained spectra to the arena; the tape is dead after."""
        for buf in self.spectra:
            self.arena.release(buf)
        self.spectra = []


def forward_with_tape(
    img: ImageGrid,
    fb: FilterBank,
    cfg: ScatteringConfig,
    arena: Arena | None = None,
) -> tuple[ScatteringCoeffs, Tape]:
    """Forward pass returning coefficients bit-identical to `forward` plus
    the tape `backward` consumes.  Expects a padded power-of-two image."""
    if arena is None:
        arena = Arena()
    spectra: list[np.ndarray] = []
    coeffs = forward(img, fb, cfg, arena, _tape_spectra=spectra)
    tape = Tape(fb, cfg, spectra, img.color_space, None, arena)
    return coeffs, tape


def transform_with_tape(
    img: ImageGrid,
    cfg: ScatteringConfig,
    fb: FilterBank | None = None,
    arena: Arena | None = None,
) -> tuple[ScatteringCoeffs, Tape]:
    """Padded-pipeline variant: pad per plan, transform, crop coefficients.
    The tape remembers the plan so `backward` lands on original pixels."""
    plan = plan_for(img, cfg)
    padded = img if plan is None else pad(img, (plan.margin_lo, plan.margin_hi), cfg.boundary)
    if fb is None:
        fb = build_filterbank(padded.height, cfg.J, cfg.L, cfg.resolved_params)
    coeffs, tape = forward_with_tape(padded, fb, cfg, arena)
    if plan is not None:
        coeffs = unpad_coeffs(coeffs, plan, cfg.J)
        tape.plan = plan
    return coeffs, tape


def _backward_channel(U0, fb, cfg, arena, ct_c, grad_out):
    """Adjoint sweep for one channel; mirrors the forward traversal."""
    M = U0.shape[0]
    J, L = cfg.J, cfg.L
    cdt = cfg.complex_dtype
    psi, phi = fb.cast(cfg.real_dtype)
    MJ = M >> J
    inv_mj2 = 1.0 / (MJ * MJ)

    G = arena.acquire((MJ, MJ), cdt)

    def lift(row, r, dst):
        # adjoint of: fold to output grid + inverse transform + real part
        G[...] = ct_c[row]
        fft2_inplace(G)
        np.multiply(G, inv_mj2, out=G)
        _periodize_vjp_into(G, J - r, dst)

    U0b = arena.acquire((M, M), cdt)
    V = arena.acquire((M, M), cdt)
    lift(0, 0, V)
    np.multiply(phi[0], V, out=U0b)

    row1 = 1
    row2 = 1 + J * L
    for j1 in range(J):
        r1 = j1
        M1 = M >> r1
        inv_m12 = 1.0 / (M1 * M1)
        eps1 = modulus_eps(cdt)
        for l1 in range(L):
            # replay the branch up to its pre-modulus grid and spectrum
            np.multiply(psi[(j1, l1, 0)], U0, out=V)
            W1 = arena.acquire((M1, M1), cdt)
            _periodize_into(V, r1, W1)
            ifft2_inplace(W1)
            U1 = arena.acquire((M1, M1), cdt)
            U1[...] = np.abs(W1)
            fft2_inplace(U1)

            U1b = arena.acquire((M1, M1), cdt)
            T1 = arena.acquire((M1, M1), cdt)
            lift(row1, r1, T1)
            row1 += 1
            np.multiply(phi[r1], T1, out=U1b)

            for j2 in range(j1 + 1, J):
                r2 = j2
                M2 = M >> r2
                inv_m22 = 1.0 / (M2 * M2)
                for l2 in range(L):
                    np.multiply(psi[(j2, l2, r1)], U1, out=T1)
                    W2 = arena.acquire((M2, M2), cdt)
                    _periodize_into(T1, r2 - r1, W2)
                    ifft2_inplace(W2)

                    U2b = arena.acquire((M2, M2), cdt)
                    lift(row2, r2, U2b)
                    row2 += 1
                    U2b *= phi[r2]
                    # through the transform of the modulus: real part of the
                    # unnormalized inverse, then the guarded modulus adjoint
                    ifft2_inplace(U2b)
                    W2 *= U2b.real * (M2 * M2) / np.maximum(np.abs(W2), eps1)
                    fft2_inplace(W2)
                    W2 *= inv_m22
                    T2 = arena.acquire((M1, M1), cdt)
                    _periodize_vjp_into(W2, r2 - r1, T2)
                    T2 *= psi[(j2, l2, r1)]
                    U1b += T2
                    arena.release(T2)
                    arena.release(U2b)
                    arena.release(W2)
            arena.release(T1)

            ifft2_inplace(U1b)
            W1 *= U1b.real * (M1 * M1) / np.maximum(np.abs(W1), eps1)
            fft2_inplace(W1)
            W1 *= inv_m12
            _periodize_vjp_into(W1, r1, V)
            V *= psi[(j1, l1, 0)]
            U0b += V
            arena.release(U1b)
            arena.release(U1)
            arena.release(W1)
    arena.release(V)
    arena.release(G)
    ifft2_inplace(U0b)
    grad_out[...] = U0b.real
    grad_out *= M * M
    arena.release(U0b)


def _pad_gradient_fold(gp: np.ndarray, plan: PadPlan, mode: BoundaryMode) -> np.ndarray:
    """Adjoint of `pad`: accumulate each padded pixel's gradient onto the
    original pixel it reads (separable row/column scatter)."""
    n = plan.original
    np_mode = "reflect" if mode is BoundaryMode.REFLECT else "wrap"
    srcmap = np.pad(np.arange(n), (plan.margin_lo, plan.margin_hi), mode=np_mode)
    c = gp.shape[0]
    rows = np.zeros((n, c, gp.shape[2]), gp.dtype)
    np.add.at(rows, srcmap, gp.transpose(1, 0, 2))
    cols = np.zeros((n, c, n), gp.dtype)
    np.add.at(cols, srcmap, rows.transpose(2, 1, 0))
    return cols.transpose(1, 2, 0)


def backward(tape: Tape, ct) -> ImageGrid:
    """Gradient of <S(x), ct> with respect to the tape's input image.

    ``ct`` is a cotangent shaped like the coefficients the taped pass
    returned (ScatteringCoeffs or bare array).
    """
    ct_data = ct.data if isinstance(ct, ScatteringCoeffs) else np.asarray(ct)
    cfg, fb, arena = tape.cfg, tape.fb, tape.arena
    M = tape.M
    MJ = M >> cfg.J
    n_path = len(path_table(cfg.J, cfg.L))
    if tape.plan is not None:
        step = 2**cfg.J
        start = tape.plan.margin_lo // step
        count = -(-tape.plan.original // step)
        if ct_data.shape != (tape.channels, n_path, count, count):
            raise InvalidInputError(
                f"cotangent shape {ct_data.shape} does not match taped pass"
            )
        full = np.zeros((tape.channels, n_path, MJ, MJ), cfg.real_dtype)
        full[..., start : start + count, start : start + count] = ct_data
        ct_data = full
    elif ct_data.shape != (tape.channels, n_path, MJ, MJ):
        raise InvalidInputError(
            f"cotangent shape {ct_data.shape} does not match taped pass"
        )
    grad = np.empty((tape.channels, M, M), cfg.real_dtype)
    for c in range(tape.channels):
        _backward_channel(tape.spectra[c][0], fb, cfg, arena, ct_data[c], grad[c])
    if tape.plan is not None:
        grad = _pad_gradient_fold(grad, tape.plan, cfg.boundary)
    return ImageGrid(grad, tape.color_space)


def recon_loss_grad(
    target: ScatteringCoeffs,
    y: ImageGrid,
    fb: FilterBank | None,
    cfg: ScatteringConfig,
    arena: Arena | None = None,
) -> tuple[float, ImageGrid]:
    """Squared coefficient distance ||S(y) - target||^2 and its exact
    gradient with respect to y."""
    coeffs, tape = transform_with_tape(y, cfg, fb, arena)
    if coeffs.data.shape != target.data.shape:
        raise InvalidInputError(
            f"target shape {target.data.shape} does not match S(y) {coeffs.data.shape}"
        )
    diff = coeffs.data.astype(np.float64) - target.data.astype(np.float64)
    loss = float(np.vdot(diff, diff).real)
    ct = (2.0 * diff).astype(cfg.real_dtype)
    grad = backward(tape, ct)
    tape.release()
    return loss, grad
