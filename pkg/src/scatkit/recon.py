"""Image reconstruction from scattering coefficients by Adam descent.

The candidate image starts as low-variance white noise in the working
color space (YUV by default, which roughly decorrelates intensity from
chroma) and is driven to minimize the squared coefficient distance to the
target.  No regularization or reparametrization is applied; values are
only clamped at export time.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .adjoint import recon_loss_grad
from .errors import InvalidInputError, MetricUndefinedError
from .filterbank import FilterBank, build_filterbank
from .fourier import Arena
from .grid import ColorSpace, ImageGrid, rgb_to_yuv, yuv_to_rgb
from .scattering import ScatteringCoeffs, ScatteringConfig, plan_for, transform_image


@dataclass(frozen=True)
class ReconConfig:
    iterations: int = 200
    init_noise_variance: float = 1e-4
    step_size: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    work_color_space: ColorSpace = ColorSpace.YUV

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be at least 1")
        if self.init_noise_variance <= 0 or self.step_size <= 0:
            raise InvalidInputError("noise variance and step size must be positive")


@dataclass
class AdamState:
    """First/second-moment accumulators plus the step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @staticmethod
    def zeros(shape, dtype) -> "AdamState":
        return AdamState(np.zeros(shape, dtype), np.zeros(shape, dtype), 0)


def adam_step(state: AdamState, grad: ImageGrid, cfg: ReconConfig) -> tuple[AdamState, ImageGrid]:
    """One bias-corrected update; returns the new state and the step to
    subtract from the iterate."""
    g = grad.data
    if g.shape != state.m.shape:
        raise InvalidInputError(f"gradient shape {g.shape} does not match state")
    t = state.step + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (g * g)
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    update = cfg.step_size * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
    return AdamState(m, v, t), ImageGrid(update.astype(g.dtype), grad.color_space)


def reconstruct(
    target: ScatteringCoeffs,
    fb: FilterBank | None,
    cfg_scat: ScatteringConfig,
    cfg_recon: ReconConfig,
    seed: int,
    original_size: int | None = None,
) -> tuple[ImageGrid, list[tuple[float, float]]]:
    """Gradient-descent inversion of a coefficient tensor.

    The target must have been computed in ``cfg_recon.work_color_space``.
    ``original_size`` pins the candidate's side length when the target came
    from a padded transform whose extent is not ``spatial * 2^J``.  Returns
    the final image (converted to RGB when the working space is YUV) and
    the per-iteration (loss, relative coefficient error) history; the
    appended last entry is evaluated at the returned image, so the history
    is honest about what is returned.
    """
    n = original_size if original_size is not None else target.spatial * 2**cfg_scat.J
    channels = target.input_channels
    space = cfg_recon.work_color_space
    if space is ColorSpace.GRAY and channels != 1:
        raise InvalidInputError("gray working space expects single-channel targets")
    if space is not ColorSpace.GRAY and channels != 3:
        raise InvalidInputError(f"{space.value} working space expects 3-channel targets")

    rng = np.random.default_rng(seed)
    dtype = cfg_scat.real_dtype
    y = rng.normal(0.0, np.sqrt(cfg_recon.init_noise_variance), (channels, n, n))
    y = y.astype(dtype)
    state = AdamState.zeros(y.shape, dtype)
    target_norm = float(np.linalg.norm(target.data.astype(np.float64)))
    if target_norm == 0.0:
        raise MetricUndefinedError("target coefficients have zero norm")

    if fb is None:
        plan = plan_for(ImageGrid(y, space), cfg_scat)
        M = n if plan is None else plan.padded_size
        fb = build_filterbank(M, cfg_scat.J, cfg_scat.L, cfg_scat.resolved_params)

    arena = Arena()
    history: list[tuple[float, float]] = []
    for _ in range(cfg_recon.iterations):
        loss, grad = recon_loss_grad(target, ImageGrid(y, space), fb, cfg_scat, arena)
        history.append((loss, np.sqrt(loss) / target_norm))
        state, update = adam_step(state, grad, cfg_recon)
        y = y - update.data
    final_img = ImageGrid(y, space)
    loss, _ = recon_loss_grad(target, final_img, fb, cfg_scat, arena)
    history.append((loss, np.sqrt(loss) / target_norm))

    window = 50
    losses = [h[0] for h in history]
    if any(
        losses[i + window] > losses[i] * (1.0 + 1e-9) for i in range(len(losses) - window)
    ):
        warnings.warn("reconstruction loss increased over a 50-iteration window")

    if space is ColorSpace.YUV:
        final_img = yuv_to_rgb(final_img)
    return final_img, history


def err_metrics(
    xhat: ImageGrid,
    x: ImageGrid,
    fb: FilterBank | None,
    cfg: ScatteringConfig,
) -> tuple[float, float]:
    """Relative reconstruction errors in image space and coefficient space:
    ``(|xhat - x| / |x|, |S(xhat) - S(x)| / |S(x)|)`` as (err_x, err_S)."""
    if xhat.data.shape != x.data.shape:
        raise InvalidInputError("images must share one shape")
    x_norm = float(np.linalg.norm(x.data.astype(np.float64)))
    if x_norm == 0.0:
        raise MetricUndefinedError("reference image has zero norm")
    err_x = float(np.linalg.norm(xhat.data.astype(np.float64) - x.data.astype(np.float64)))
    err_x /= x_norm
    s_hat, _ = transform_image(xhat, cfg, fb)
    s_ref, _ = transform_image(x, cfg, fb)
    s_norm = float(np.linalg.norm(s_ref.data.astype(np.float64)))
    if s_norm == 0.0:
        raise MetricUndefinedError("reference coefficients have zero norm")
    err_s = float(
        np.linalg.norm(s_hat.data.astype(np.float64) - s_ref.data.astype(np.float64))
    )
    return err_x, err_s / s_norm


def scatter_in_work_space(
    img: ImageGrid,
    cfg: ScatteringConfig,
    cfg_recon: ReconConfig,
    fb: FilterBank | None = None,
) -> ScatteringCoeffs:
    """Transform an image in the reconstruction working space (RGB input is
    converted first); the result is a valid `reconstruct` target."""
    space = cfg_recon.work_color_space
    if img.color_space is ColorSpace.RGB and space is ColorSpace.YUV:
        img = rgb_to_yuv(img)
    elif img.color_space is not space:
        raise InvalidInputError(
            f"cannot prepare a {space.value} target from a {img.color_space.value} image"
        )
    coeffs, _ = transform_image(img, cfg, fb)
    return coeffs
