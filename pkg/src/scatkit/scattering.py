"""Forward scattering transform.

The default engine walks the computation tree in infix order with a fixed
set of reusable buffers: the input spectrum stays resident while each
first-order branch (and each second-order branch under it) is produced,
consumed, and released before the next one starts.  Peak temporary storage
is bounded by 5*M^2 complex slots per image regardless of J and L, which
the :class:`~scatkit.fourier.Arena` instrumentation verifies.

A brute-force spatial-domain oracle (`forward_oracle`) computes the same
coefficients by direct circular convolution at full resolution, and a
debug mode of `forward` disables intermediate subsampling; together they
isolate the aliasing cost of the fast path.
"""
from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.fft as _fft

from .errors import InvalidInputError
from .filterbank import FilterBank, MorletParams, build_filterbank
from .fourier import Arena, fft2_inplace, ifft2_inplace
from .grid import BoundaryMode, ColorSpace, ImageGrid, PadPlan, pad, pad_plan, unpad_coeffs


@dataclass(frozen=True)
class ScatteringConfig:
    J: int
    L: int
    boundary: BoundaryMode = BoundaryMode.REFLECT
    precision: str = "single"
    params: MorletParams | None = None

    def __post_init__(self):
        if self.J < 1 or self.L < 1:
            raise InvalidInputError("J and L must be at least 1")
        if self.precision not in ("single", "double"):
            raise InvalidInputError(f"unknown precision {self.precision!r}")

    @property
    def real_dtype(self):
        return np.float32 if self.precision == "single" else np.float64

    @property
    def complex_dtype(self):
        return np.complex64 if self.precision == "single" else np.complex128

    @property
    def resolved_params(self) -> MorletParams:
        return self.params if self.params is not None else MorletParams.default(self.L)


class PathIndex(NamedTuple):
    """One output channel: order 0, 1 or 2 plus its (scale, angle) choices.

    Unused fields hold -1.  Second-order paths always have j1 < j2.
    """

    order: int
    j1: int = -1
    l1: int = -1
    j2: int = -1
    l2: int = -1


def path_table(J: int, L: int) -> list[PathIndex]:
    """Deterministic path ordering: order 0, then (j1, l1), then
    (j1, l1, j2, l2) with j1 < j2."""
    if J < 1 or L < 1:
        raise InvalidInputError("J and L must be at least 1")
    out = [PathIndex(0)]
    for j1 in range(J):
        for l1 in range(L):
            out.append(PathIndex(1, j1, l1))
    for j1 in range(J):
        for l1 in range(L):
            for j2 in range(j1 + 1, J):
                for l2 in range(L):
                    out.append(PathIndex(2, j1, l1, j2, l2))
    return out


def n_paths(J: int, L: int) -> int:
    return 1 + J * L + (J * (J - 1) // 2) * L * L


@dataclass(frozen=True)
class ScatteringCoeffs:
    """Coefficient tensor indexed [input_channel][path][y][x]."""

    data: np.ndarray
    paths: tuple[PathIndex, ...]
    J: int
    L: int

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[1] != len(self.paths):
            raise InvalidInputError("coefficient tensor does not match path table")

    @property
    def input_channels(self) -> int:
        return self.data.shape[0]

    @property
    def spatial(self) -> int:
        return self.data.shape[2]


def _validate_forward_args(img: ImageGrid, fb: FilterBank, cfg: ScatteringConfig) -> int:
    M = img.height
    if img.width != M or M < 2 or M & (M - 1):
        raise InvalidInputError(
            f"forward expects a square power-of-two image, got {img.height}x{img.width}"
        )
    if fb.M != M:
        raise InvalidInputError(f"filter bank built for {fb.M}, image is {M}")
    if fb.J != cfg.J or fb.L != cfg.L:
        raise InvalidInputError("filter bank (J, L) does not match config")
    if fb.params != cfg.resolved_params:
        raise InvalidInputError("filter bank wavelet parameters do not match config")
    if 2**cfg.J > M:
        raise InvalidInputError(f"2^J = {2 ** cfg.J} exceeds image size {M}")
    return M


def _periodize_into(src: np.ndarray, k: int, dst: np.ndarray) -> None:
    if k == 0:
        dst[...] = src
        return
    t = src.shape[-1] >> k
    lead = src.shape[:-2]
    np.mean(src.reshape(lead + (2**k, t, 2**k, t)), axis=(-4, -2), out=dst)


def _forward_lanes(x, fb, cfg, arena, out, full_res, tape_spectra):
    """Cascade over a stack of independent maps.

    ``x`` is (lanes, M, M); ``out`` is (lanes, paths, M/2^J, M/2^J).  Every
    frequency-domain operation batches over the lane axis with per-lane
    arithmetic identical to a one-lane call, so lane grouping never changes
    results.  Per lane, peak temporary storage stays within the 5*M^2
    complex-slot budget.
    """
    M = fb.M
    B = x.shape[0]
    J, L = cfg.J, cfg.L
    cdt = cfg.complex_dtype
    psi, phi = fb.cast(cfg.real_dtype)
    MJ = M >> J

    def finish(spec, r, row):
        # low-pass at resolution r, fold to the output grid, inverse transform
        P = arena.acquire((B, MJ, MJ), cdt)
        _periodize_into(spec, J - r, P)
        ifft2_inplace(P)
        out[:, row] = P.real
        arena.release(P)

    U0 = arena.acquire((B, M, M), cdt)
    U0[...] = x
    fft2_inplace(U0)
    if tape_spectra is not None:
        keep = arena.acquire((B, M, M), cdt)  # retained for the backward pass
        keep[...] = U0
        tape_spectra.append(keep)

    V = arena.acquire((B, M, M), cdt)
    np.multiply(phi[0], U0, out=V)
    finish(V, 0, 0)

    row1 = 1
    row2 = 1 + J * L
    for j1 in range(J):
        r1 = 0 if full_res else j1
        M1 = M >> r1
        for l1 in range(L):
            np.multiply(psi[(j1, l1, 0)], U0, out=V)
            U1 = arena.acquire((B, M1, M1), cdt)
            _periodize_into(V, r1, U1)
            ifft2_inplace(U1)
            U1[...] = np.abs(U1)
            fft2_inplace(U1)

            V2 = arena.acquire((B, M1, M1), cdt)
            np.multiply(phi[r1], U1, out=V2)
            finish(V2, r1, row1)
            row1 += 1

            for j2 in range(j1 + 1, J):
                r2 = 0 if full_res else j2
                M2 = M >> r2
                for l2 in range(L):
                    np.multiply(psi[(j2, l2, r1)], U1, out=V2)
                    U2 = arena.acquire((B, M2, M2), cdt)
                    _periodize_into(V2, r2 - r1, U2)
                    ifft2_inplace(U2)
                    U2[...] = np.abs(U2)
                    fft2_inplace(U2)
                    U2 *= phi[r2]
                    finish(U2, r2, row2)
                    row2 += 1
                    arena.release(U2)
            arena.release(V2)
            arena.release(U1)
    arena.release(V)
    arena.release(U0)


def forward(
    img: ImageGrid,
    fb: FilterBank,
    cfg: ScatteringConfig,
    arena: Arena | None = None,
    full_resolution: bool = False,
    _tape_spectra: list | None = None,
) -> ScatteringCoeffs:
    """Order-0/1/2 coefficients of a padded (power-of-two) image.

    Each input channel is transformed independently, sharing one arena
    sequentially.  ``full_resolution=True`` disables intermediate
    subsampling (debug mode: the only difference from the oracle is then
    FFT rounding).
    """
    M = _validate_forward_args(img, fb, cfg)
    if arena is None:
        arena = Arena()
    paths = tuple(path_table(cfg.J, cfg.L))
    MJ = M >> cfg.J
    out = np.empty((img.channels, len(paths), MJ, MJ), cfg.real_dtype)
    for c in range(img.channels):
        _forward_lanes(
            img.data[c : c + 1], fb, cfg, arena, out[c : c + 1], full_resolution,
            _tape_spectra,
        )
    return ScatteringCoeffs(out, paths, cfg.J, cfg.L)


# Lane grouping for batched transforms: enough to amortize per-call
# overhead on small grids, capped so large grids stay memory-friendly.
_MAX_BATCH_LANES = 48


def _forward_chunk(stack, fb, cfg, paths):
    MJ = fb.M >> cfg.J
    out = np.empty((stack.shape[0], len(paths), MJ, MJ), cfg.real_dtype)
    _forward_lanes(stack, fb, cfg, Arena(), out, False, None)
    return out


def forward_batch(
    imgs: list[ImageGrid],
    fb: FilterBank,
    cfg: ScatteringConfig,
    workers: int = 1,
) -> list[ScatteringCoeffs]:
    """Transform a homogeneous batch.

    Channels of consecutive images are stacked into fixed-size lane groups
    (per-lane arithmetic is identical to `forward`, so outputs are
    bit-identical to sequential per-image calls) and the groups are spread
    over ``workers`` threads; worker count never changes results.
    """
    if not imgs:
        return []
    shape = imgs[0].data.shape
    for im in imgs:
        if im.data.shape != shape:
            raise InvalidInputError("batch images must share one shape")
    _validate_forward_args(imgs[0], fb, cfg)
    channels = shape[0]
    paths = tuple(path_table(cfg.J, cfg.L))
    per_chunk = max(1, _MAX_BATCH_LANES // channels)
    chunks = [imgs[i : i + per_chunk] for i in range(0, len(imgs), per_chunk)]

    def run(chunk):
        stack = np.concatenate([im.data for im in chunk], axis=0)
        return _forward_chunk(stack, fb, cfg, paths)

    if workers <= 1:
        outs = [run(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(run, chunks))

    results = []
    for chunk, block in zip(chunks, outs):
        for i in range(len(chunk)):
            data = block[i * channels : (i + 1) * channels].copy()
            results.append(ScatteringCoeffs(data, paths, cfg.J, cfg.L))
    return results


# ---------------------------------------------------------------------------
# Spatial-domain oracle

def _circulant_conv(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Exact circular convolution by row-circulant matmuls (no transforms)."""
    M = x.shape[0]
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    out = np.zeros((M, M), np.complex128)
    for d in range(M):
        out += np.roll(x @ h[d][idx].T, d, axis=0)
    return out


def forward_oracle(img: ImageGrid, fb: FilterBank, cfg: ScatteringConfig) -> ScatteringCoeffs:
    """Reference transform: every path by direct spatial circular
    convolution at full resolution, subsampling only the final output.

    Quadratic cost per pixel; intended for grids of 64^2 and below.
    """
    M = _validate_forward_args(img, fb, cfg)
    J, L = cfg.J, cfg.L
    paths = tuple(path_table(J, L))
    MJ = M >> J
    step = 2**J
    out = np.empty((img.channels, len(paths), MJ, MJ), np.float64)

    k_phi = _fft.ifft2(fb.phi[0].astype(np.float64))
    k_psi = {
        (j, l): _fft.ifft2(fb.psi[(j, l, 0)].astype(np.float64))
        for j in range(J)
        for l in range(L)
    }

    def smooth_sub(u):
        return _circulant_conv(u, k_phi).real[::step, ::step]

    for c in range(img.channels):
        x = img.data[c].astype(np.complex128)
        out[c, 0] = smooth_sub(x)
        row1 = 1
        row2 = 1 + J * L
        for j1 in range(J):
            for l1 in range(L):
                u1 = np.abs(_circulant_conv(x, k_psi[(j1, l1)]))
                out[c, row1] = smooth_sub(u1.astype(np.complex128))
                row1 += 1
                for j2 in range(j1 + 1, J):
                    for l2 in range(L):
                        u2 = np.abs(
                            _circulant_conv(u1.astype(np.complex128), k_psi[(j2, l2)])
                        )
                        out[c, row2] = smooth_sub(u2.astype(np.complex128))
                        row2 += 1
    return ScatteringCoeffs(out.astype(cfg.real_dtype), paths, J, L)


# ---------------------------------------------------------------------------
# Memory accounting

def tree_storage_count(J: int, L: int, N: int) -> int:
    """Coefficient count of the breadth-first (tree) evaluation strategy:
    all first-order modulus maps, all second-order wavelet outputs, and the
    final averaged coefficients are materialized at once."""
    nn = N * N
    first = L * sum(nn // 4**j for j in range(J)) + nn // 4**J
    second = 0
    for j1 in range(J):
        second += L * (L * sum(nn // 4**j2 for j2 in range(j1 + 1, J)) + nn // 4**J)
    final = (J * (J - 1) // 2) * L * L * (nn // 4**J)
    return first + second + final


def memory_report(cfg: ScatteringConfig, N: int) -> tuple[int, float]:
    """(tree-strategy coefficient count, measured infix peak in complex slots)."""
    tree = tree_storage_count(cfg.J, cfg.L, N)
    fb = build_filterbank(N, cfg.J, cfg.L, cfg.resolved_params)
    arena = Arena()
    img = ImageGrid(np.zeros((1, N, N), cfg.real_dtype), ColorSpace.GRAY)
    forward(img, fb, cfg, arena)
    return tree, arena.peak_slots


# ---------------------------------------------------------------------------
# Padded pipeline

def plan_for(img: ImageGrid, cfg: ScatteringConfig) -> PadPlan | None:
    """Padding plan for an image, or None when it can be used as-is."""
    n = img.height
    if img.width != n:
        raise InvalidInputError("non-square images require explicit padding")
    pow2 = n >= 2 and not (n & (n - 1))
    if pow2 and cfg.boundary is BoundaryMode.PERIODIC:
        return None
    return pad_plan(n, cfg.J)


def transform_image(
    img: ImageGrid,
    cfg: ScatteringConfig,
    fb: FilterBank | None = None,
    arena: Arena | None = None,
) -> tuple[ScatteringCoeffs, PadPlan | None]:
    """Pad per plan, run the cascade, and crop coefficients back to the
    original extent.  Builds the filter bank on demand."""
    plan = plan_for(img, cfg)
    padded = img if plan is None else pad(img, (plan.margin_lo, plan.margin_hi), cfg.boundary)
    if fb is None:
        fb = build_filterbank(padded.height, cfg.J, cfg.L, cfg.resolved_params)
    coeffs = forward(padded, fb, cfg, arena)
    if plan is not None:
        coeffs = unpad_coeffs(coeffs, plan, cfg.J)
    return coeffs, plan


# ---------------------------------------------------------------------------
# SCT1 coefficient files

SCT1_MAGIC = b"SCT1"


def _json_blob(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode()


def write_sct1(path, coeffs: ScatteringCoeffs, original_size: int, boundary: BoundaryMode) -> None:
    header = {
        "J": coeffs.J,
        "L": coeffs.L,
        "N": original_size,
        "boundary": boundary.value,
        "input_channels": coeffs.input_channels,
        "spatial": coeffs.spatial,
        "paths": [list(p) for p in coeffs.paths],
    }
    blob = _json_blob(header)
    with open(path, "wb") as fh:
        fh.write(SCT1_MAGIC)
        fh.write(struct.pack("<II", 1, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(coeffs.data, "<f4").tobytes())


def read_sct1(path) -> tuple[ScatteringCoeffs, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != SCT1_MAGIC:
        raise InvalidInputError("bad SCT1 magic")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != 1:
        raise InvalidInputError(f"unsupported SCT1 version {version}")
    header = json.loads(raw[12 : 12 + hlen].decode())
    paths = tuple(PathIndex(*p) for p in header["paths"])
    c, s = header["input_channels"], header["spatial"]
    data = np.frombuffer(raw, "<f4", c * len(paths) * s * s, 12 + hlen)
    coeffs = ScatteringCoeffs(
        data.reshape(c, len(paths), s, s).copy(), paths, header["J"], header["L"]
    )
    return coeffs, header
