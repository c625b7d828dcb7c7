"""Command-line surface: transform, reconstruct, filters, train, attack,
analyze, bench, and selftest.

Exit codes: 0 success, 1 invariant/assertion failure, 2 usage error.
All tabular output is CSV with a header row; structured reports are JSON;
numbers print with 9 significant digits.  Every command is deterministic
given its flags and --seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import datasets
from .adjoint import backward, forward_with_tape
from .classify import (
    angular_spectrum,
    fgsm_attack,
    predict,
    read_slm1,
    sparsify_angular,
    train_linear,
    write_slm1,
    TrainConfig,
)
from .errors import InvalidInputError, MetricUndefinedError
from .fileio import read_image, write_image, write_rawf_array
from .filterbank import build_filterbank, littlewood_paley
from .fourier import Arena, idft2
from .grid import BoundaryMode, ColorSpace, ImageGrid
from .recon import ReconConfig, reconstruct, scatter_in_work_space
from .scattering import (
    ScatteringConfig,
    forward,
    forward_batch,
    forward_oracle,
    memory_report,
    path_table,
    plan_for,
    read_sct1,
    transform_image,
    write_sct1,
)

FMT = "%.9g"


def _fmt(x) -> str:
    return FMT % float(x)


def _default_workers() -> int:
    env = os.environ.get("SCATKIT_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _boundary(name: str) -> BoundaryMode:
    return BoundaryMode.PERIODIC if name == "periodic" else BoundaryMode.REFLECT


def _scat_config(args) -> ScatteringConfig:
    return ScatteringConfig(
        J=args.J,
        L=args.L,
        boundary=_boundary(args.boundary),
        precision=args.precision,
    )


def _add_scat_flags(p, boundary_default="reflect"):
    p.add_argument("--J", type=int, default=2, help="scale count")
    p.add_argument("--L", type=int, default=8, help="angle count")
    p.add_argument(
        "--boundary", choices=("reflect", "periodic"), default=boundary_default
    )
    p.add_argument("--precision", choices=("single", "double"), default="single")


# ---------------------------------------------------------------------------

def cmd_forward(args) -> int:
    cfg = _scat_config(args)
    multi = len(args.images) > 1
    if multi:
        os.makedirs(args.out, exist_ok=True)
    fb = None
    for path in args.images:
        img = read_image(path)
        if fb is None:
            plan = plan_for(img, cfg)
            M = img.height if plan is None else plan.padded_size
            fb = build_filterbank(M, cfg.J, cfg.L, cfg.resolved_params)
        coeffs, plan = transform_image(img, cfg, fb)
        out = (
            os.path.join(args.out, os.path.splitext(os.path.basename(path))[0] + ".sct1")
            if multi
            else args.out
        )
        write_sct1(out, coeffs, img.height, cfg.boundary)
        channels = coeffs.input_channels * len(coeffs.paths)
        print(
            "paths=%d channels=%d spatial=%dx%d out=%s"
            % (len(coeffs.paths), channels, coeffs.spatial, coeffs.spatial, out)
        )
    return 0


def cmd_filters(args) -> int:
    cfg = _scat_config(args)
    fb = build_filterbank(args.size, cfg.J, cfg.L, cfg.resolved_params)
    outdir = args.out_dir
    os.makedirs(outdir, exist_ok=True)
    lines = ["kind,j,l,r,peak_wx,peak_wy,l2_norm"]

    def export(tag, spec, j, l, r):
        write_rawf_array(os.path.join(outdir, f"{tag}_spec.rawf"), spec.astype(np.float32))
        spatial = idft2(spec.astype(np.complex128))
        write_rawf_array(
            os.path.join(outdir, f"{tag}_spatial.rawf"),
            np.stack([spatial.real, spatial.imag]).astype(np.float32),
        )
        m = spec.shape[0]
        peak = np.unravel_index(np.argmax(np.abs(spec)), spec.shape)
        w = 2.0 * np.pi * np.fft.fftfreq(m)
        lines.append(
            ",".join(
                [tag.split("_")[0], str(j), str(l), str(r)]
                + [_fmt(w[peak[0]]), _fmt(w[peak[1]]), _fmt(np.linalg.norm(spec))]
            )
        )

    for (j, l, r), spec in sorted(fb.psi.items()):
        export(f"psi_j{j}_l{l}_r{r}", spec, j, l, r)
    for r, spec in sorted(fb.phi.items()):
        export(f"phi_r{r}", spec, -1, -1, r)
    manifest = os.path.join(outdir, "manifest.csv")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("filters=%d manifest=%s" % (len(fb.psi) + len(fb.phi), manifest))
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _scat_config(args)
    space = ColorSpace(args.colorspace)
    rcfg = ReconConfig(
        iterations=args.iters, step_size=args.step, work_color_space=space
    )
    reference = None
    if args.image:
        reference = read_image(args.image)
        target = scatter_in_work_space(reference, cfg, rcfg)
        original_size = reference.height
    else:
        target, header = read_sct1(args.target)
        if header["J"] != cfg.J or header["L"] != cfg.L:
            raise InvalidInputError("SCT1 header (J, L) does not match flags")
        original_size = header["N"]
    img, history = reconstruct(target, None, cfg, rcfg, args.seed, original_size)
    write_image(args.out, img)
    if args.history:
        with open(args.history, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss", "err_S"])
            for i, (loss, err_s) in enumerate(history):
                writer.writerow([i, _fmt(loss), _fmt(err_s)])
    line = "iterations=%d final_loss=%s err_S=%s out=%s" % (
        args.iters,
        _fmt(history[-1][0]),
        _fmt(history[-1][1]),
        args.out,
    )
    if reference is not None:
        err_x = np.linalg.norm(img.data - reference.data) / np.linalg.norm(reference.data)
        line += " err_x=%s" % _fmt(err_x)
    print(line)
    return 0


def _features(images, cfg):
    feats = []
    arena = Arena()
    fb = None
    for im in images:
        if fb is None:
            plan = plan_for(im, cfg)
            M = im.height if plan is None else plan.padded_size
            fb = build_filterbank(M, cfg.J, cfg.L, cfg.resolved_params)
        coeffs, _ = transform_image(im, cfg, fb, arena)
        feats.append(coeffs)
    return feats


def cmd_train(args) -> int:
    cfg = _scat_config(args)
    if args.data:
        images, labels, names = datasets.load_image_folder(args.data)
        classes = len(names)
    else:
        images, labels = datasets.texture_dataset(args.synthetic, seed=args.seed)
        classes = datasets.N_TEXTURE_CLASSES
    feats = _features(images, cfg)
    tcfg = TrainConfig(epochs=args.epochs, step=args.step)
    model = train_linear(list(zip(feats, labels)), classes, tcfg, seed=args.seed)
    correct = sum(predict(model, f)[0] == y for f, y in zip(feats, labels))
    write_slm1(args.out, model)
    print(
        "samples=%d classes=%d train_accuracy=%s out=%s"
        % (len(images), classes, _fmt(correct / len(images)), args.out)
    )
    return 0


def cmd_attack(args) -> int:
    model = read_slm1(args.model)
    img = read_image(args.image)
    cfg = _scat_config(args)
    if args.untargeted == (args.target_class is not None):
        raise InvalidInputError("pass exactly one of --target-class or --untargeted")
    eps_grid = [float(e) for e in args.eps.split(",")]
    eps_x, adv = fgsm_attack(model, None, cfg, img, args.target_class, eps_grid)
    if eps_x is None:
        print("status=exhausted no epsilon in grid")
        return 0
    if args.out:
        write_image(args.out, adv)
    label = "untargeted" if args.target_class is None else str(args.target_class)
    print("status=success eps_x=%s target=%s" % (_fmt(eps_x), label))
    return 0


def cmd_analyze(args) -> int:
    model = read_slm1(args.model)
    spec = angular_spectrum(model)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block", "freq1", "freq2", "energy"])
        for w1, v in enumerate(spec.omega1):
            writer.writerow(["omega1", w1, "", _fmt(v)])
        for w1 in range(spec.omega2.shape[0]):
            for w2 in range(spec.omega2.shape[1]):
                writer.writerow(["omega2", w1, w2, _fmt(spec.omega2[w1, w2])])
    print(
        "omega1_sum=%s omega2_sum=%s out=%s"
        % (_fmt(spec.omega1.sum()), _fmt(spec.omega2.sum()), args.out)
    )
    if args.keep is not None:
        sparse, stats = sparsify_angular(model, args.keep)
        if args.sparse_out:
            write_slm1(args.sparse_out, sparse)
        print(
            "keep=%s achieved_sparsity=%s energy_retained=%s"
            % (_fmt(args.keep), _fmt(stats["achieved_sparsity"]), _fmt(stats["energy_retained"]))
        )
    return 0


# ---------------------------------------------------------------------------

@dataclass
class BenchRecord:
    op: str
    shape: str
    J: int
    L: int
    workers: int
    wall_ms: float
    peak_slots: float
    throughput: float


def _bench_rows(args) -> list[BenchRecord]:
    rng = np.random.default_rng(args.seed)
    rows: list[BenchRecord] = []
    for size in args.sizes:
        cfg = ScatteringConfig(J=args.J, L=args.L, boundary=BoundaryMode.PERIODIC)
        fb = build_filterbank(size, cfg.J, cfg.L, cfg.resolved_params)
        imgs = [
            ImageGrid(rng.random((3, size, size), dtype=np.float32))
            for _ in range(args.batch)
        ]
        arena = Arena()
        forward(imgs[0], fb, cfg, arena)  # warm-up; also measures peak
        t0 = time.perf_counter()
        outs = forward_batch(imgs, fb, cfg, workers=args.workers)
        wall = (time.perf_counter() - t0) * 1e3
        digest = hashlib.sha256(b"".join(o.data.tobytes() for o in outs)).hexdigest()
        rows.append(
            BenchRecord(
                op="forward_batch",
                shape="%dx%dx3x%d" % (size, size, args.batch),
                J=args.J,
                L=args.L,
                workers=args.workers,
                wall_ms=wall,
                peak_slots=arena.peak_slots,
                throughput=args.batch / (wall / 1e3),
            )
        )
        print(
            "forward_batch size=%d batch=%d workers=%d wall_ms=%s peak=%s sha=%s"
            % (size, args.batch, args.workers, _fmt(wall), _fmt(arena.peak_slots), digest[:12])
        )
    if args.oracle:
        size = 64
        cfg = ScatteringConfig(J=args.J, L=args.L, boundary=BoundaryMode.PERIODIC)
        fb = build_filterbank(size, cfg.J, cfg.L, cfg.resolved_params)
        img = ImageGrid(rng.random((3, size, size), np.float32))
        arena = Arena()
        t0 = time.perf_counter()
        forward(img, fb, cfg, arena)
        fast_ms = (time.perf_counter() - t0) * 1e3
        t0 = time.perf_counter()
        forward_oracle(img, fb, cfg)
        slow_ms = (time.perf_counter() - t0) * 1e3
        rows.append(
            BenchRecord("forward", "64x64x3x1", args.J, args.L, 1, fast_ms, arena.peak_slots, 1e3 / fast_ms)
        )
        rows.append(BenchRecord("forward_oracle", "64x64x3x1", args.J, args.L, 1, slow_ms, 0.0, 1e3 / slow_ms))
        print(
            "oracle_64 fast_ms=%s oracle_ms=%s speedup=%s"
            % (_fmt(fast_ms), _fmt(slow_ms), _fmt(slow_ms / fast_ms))
        )
    for J in (2, 3, 4):
        cfg = ScatteringConfig(J=J, L=args.L)
        tree, peak = memory_report(cfg, 256)
        rows.append(BenchRecord("memory_report", "256x256", J, args.L, 1, 0.0, peak, 0.0))
        print(
            "memory J=%d tree_coeffs=%d infix_peak=%s ratio=%s"
            % (J, tree, _fmt(peak), _fmt(tree / peak))
        )
    return rows


def cmd_bench(args) -> int:
    rows = _bench_rows(args)
    bad = [r for r in rows if r.op.startswith("forward") and r.peak_slots > 5 * _shape_m(r.shape) ** 2]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["op", "shape", "J", "L", "workers", "wall_ms", "peak_slots", "throughput"])
        for r in rows:
            writer.writerow(
                [r.op, r.shape, r.J, r.L, r.workers, _fmt(r.wall_ms), _fmt(r.peak_slots), _fmt(r.throughput)]
            )
    print("rows=%d out=%s" % (len(rows), args.out))
    return 1 if bad else 0


def _shape_m(shape: str) -> int:
    return int(shape.split("x")[0])


# ---------------------------------------------------------------------------

def _selftest_checks(seed: int, fault: str | None):
    rng = np.random.default_rng(seed)
    checks = []

    counts = {2: 243, 3: 651, 4: 1251}
    for J, want in counts.items():
        got = 3 * len(path_table(J, 8))
        checks.append(("channel_count_J%d" % J, got == want, got, want))

    cfg = ScatteringConfig(J=2, L=4, boundary=BoundaryMode.PERIODIC, precision="double")
    fb = build_filterbank(16, 2, 4, cfg.resolved_params)
    dev_dbg = dev_def = 0.0
    for _ in range(3):
        img = ImageGrid(rng.random((1, 16, 16)), ColorSpace.GRAY)
        ref = forward_oracle(img, fb, cfg)
        nrm = np.linalg.norm(ref.data)
        dbg = forward(img, fb, cfg, full_resolution=True)
        dft = forward(img, fb, cfg)
        dev_dbg = max(dev_dbg, np.linalg.norm(dbg.data - ref.data) / nrm)
        dev_def = max(dev_def, np.linalg.norm(dft.data - ref.data) / nrm)
    checks.append(("oracle_debug_mode", dev_dbg < 1e-5, dev_dbg, 1e-5))
    checks.append(("oracle_default_mode", dev_def < 1e-2, dev_def, 1e-2))

    img = ImageGrid(rng.random((1, 16, 16)), ColorSpace.GRAY)
    coeffs, tape = forward_with_tape(img, fb, cfg)
    w = rng.standard_normal(coeffs.data.shape)
    v = rng.standard_normal(img.data.shape)
    h = 1e-6
    sp = forward(ImageGrid(img.data + h * v, ColorSpace.GRAY), fb, cfg)
    sm = forward(ImageGrid(img.data - h * v, ColorSpace.GRAY), fb, cfg)
    lhs = float(np.vdot(w, (sp.data - sm.data) / (2 * h)))
    rhs = float(np.vdot(v, backward(tape, w).data))
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-30)
    checks.append(("adjoint_dot_product", rel < 1e-7, rel, 1e-7))

    sx = forward(img, fb, cfg)
    sy = forward(ImageGrid(np.roll(img.data, (4, 4), (1, 2)), ColorSpace.GRAY), fb, cfg)
    tdev = np.linalg.norm(sy.data - np.roll(sx.data, (1, 1), (2, 3))) / np.linalg.norm(sx.data)
    checks.append(("translation_covariance", tdev < 1e-5, tdev, 1e-5))

    cfgr = ScatteringConfig(J=2, L=8, boundary=BoundaryMode.PERIODIC)
    fbr = build_filterbank(32, 2, 8, cfgr.resolved_params)
    xr = rng.random((1, 32, 32)).astype(np.float32)

    def rot90_origin(a):
        out = a[:, ::-1].copy()
        return np.roll(out, 1, axis=1).T.copy()

    sa = forward(ImageGrid(xr, ColorSpace.GRAY), fbr, cfgr)
    sr = forward(ImageGrid(rot90_origin(xr[0])[None].copy(), ColorSpace.GRAY), fbr, cfgr)
    rot_dev = 0.0
    for i, p in enumerate(sa.paths):
        if p.order != 1:
            continue
        src = sa.paths.index(type(p)(1, p.j1, (p.l1 - 4) % 8))
        expected = rot90_origin(sa.data[0, src])
        rot_dev = max(
            rot_dev,
            float(np.linalg.norm(sr.data[0, i] - expected) / np.linalg.norm(sa.data[0, src])),
        )
    checks.append(("rotation_covariance", rot_dev <= 0.03, rot_dev, 0.03))

    import tempfile

    from .classify import LinearModel, read_slm1, write_slm1
    from .scattering import read_sct1, write_sct1

    with tempfile.TemporaryDirectory() as tmp:
        sct = os.path.join(tmp, "probe.sct1")
        write_sct1(sct, sx, 16, cfg.boundary)
        loaded, header = read_sct1(sct)
        sct2 = os.path.join(tmp, "probe2.sct1")
        write_sct1(sct2, loaded, header["N"], BoundaryMode(header["boundary"]))
        sct_ok = open(sct, "rb").read() == open(sct2, "rb").read()
        checks.append(("sct1_roundtrip", sct_ok, float(sct_ok), 1.0))

        paths_m = path_table(2, 4)
        model = LinearModel(
            weights=rng.standard_normal((3, 1, len(paths_m), 4, 4)).astype(np.float32),
            bias=rng.standard_normal(3).astype(np.float32),
            J=2,
            L=4,
            paths=tuple(paths_m),
            feat_mean=rng.standard_normal((1, len(paths_m))).astype(np.float32),
            feat_scale=np.abs(rng.standard_normal((1, len(paths_m)))).astype(np.float32) + 0.5,
        )
        slm = os.path.join(tmp, "m.slm1")
        write_slm1(slm, model)
        slm2 = os.path.join(tmp, "m2.slm1")
        write_slm1(slm2, read_slm1(slm))
        slm_ok = open(slm, "rb").read() == open(slm2, "rb").read()
        checks.append(("slm1_roundtrip", slm_ok, float(slm_ok), 1.0))

    rgb = ImageGrid(rng.random((3, 8, 8)), ColorSpace.RGB)
    from .grid import rgb_to_yuv, yuv_to_rgb

    round_err = float(np.abs(yuv_to_rgb(rgb_to_yuv(rgb)).data - rgb.data).max())
    checks.append(("color_roundtrip", round_err < 1e-12, round_err, 1e-12))

    fb8 = build_filterbank(64, 2, 8)
    if fault == "filterbank":
        fb8.psi[(0, 0, 0)] = fb8.psi[(0, 0, 0)] * 10.0  # injected corruption
    _, max_e, min_band = littlewood_paley(fb8)
    checks.append(("littlewood_paley_upper", max_e <= 1.05, max_e, 1.05))
    checks.append(("littlewood_paley_band", min_band >= 0.35, min_band, 0.35))

    cfg8 = ScatteringConfig(J=2, L=8, boundary=BoundaryMode.PERIODIC)
    eps = max(max_e, 1.0) - 1.0
    worst = 0.0
    fb64 = build_filterbank(32, 2, 8)
    for _ in range(10):
        a = rng.random((1, 32, 32)).astype(np.float32)
        b = rng.random((1, 32, 32)).astype(np.float32)
        sa = forward(ImageGrid(a, ColorSpace.GRAY), fb64, cfg8)
        sb = forward(ImageGrid(b, ColorSpace.GRAY), fb64, cfg8)
        worst = max(
            worst,
            np.linalg.norm(sa.data - sb.data) / np.linalg.norm(a - b),
        )
    checks.append(("non_expansive", worst <= 1.0 + eps + 1e-6, worst, 1.0 + eps))

    for J in (2, 3, 4):
        tree, peak = memory_report(ScatteringConfig(J=J, L=8), 64)
        checks.append(("infix_peak_J%d" % J, peak <= 5 * 64 * 64, peak, 5 * 64 * 64))
    return checks


def cmd_selftest(args) -> int:
    checks = _selftest_checks(args.seed, args.inject_fault)
    report = []
    ok = True
    for name, passed, value, bound in checks:
        ok &= bool(passed)
        print("%s %-24s measured=%s bound=%s" % ("PASS" if passed else "FAIL", name, _fmt(value), _fmt(bound)))
        report.append(
            {"invariant": name, "passed": bool(passed), "measured": float(value), "bound": float(bound)}
        )
    if args.report:
        with open(args.report, "w") as fh:
            json.dump({"passed": ok, "checks": report}, fh, indent=2, sort_keys=True)
    print("selftest %s (%d checks)" % ("passed" if ok else "FAILED", len(checks)))
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scatkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("forward", help="transform images to SCT1 files")
    f.add_argument("images", nargs="+")
    f.add_argument("--out", required=True, help="output file, or directory for multiple inputs")
    _add_scat_flags(f)
    f.set_defaults(func=cmd_forward)

    f = sub.add_parser("filters", help="export the filter bank and manifest")
    f.add_argument("--size", type=int, default=64)
    f.add_argument("--out-dir", required=True)
    _add_scat_flags(f)
    f.set_defaults(func=cmd_filters)

    f = sub.add_parser("reconstruct", help="invert coefficients by gradient descent")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--target", help="SCT1 file")
    src.add_argument("--image", help="image to transform first")
    f.add_argument("--out", required=True)
    f.add_argument("--history", help="CSV loss history")
    f.add_argument("--iters", type=int, default=200)
    f.add_argument("--step", type=float, default=0.05)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--colorspace", choices=("yuv", "rgb", "gray"), default="yuv")
    _add_scat_flags(f, boundary_default="periodic")
    f.set_defaults(func=cmd_reconstruct)

    f = sub.add_parser("train", help="train a linear probe on scattering features")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="folder with one subdirectory per class")
    src.add_argument("--synthetic", type=int, help="samples per synthetic texture class")
    f.add_argument("--out", required=True)
    f.add_argument("--epochs", type=int, default=40)
    f.add_argument("--step", type=float, default=0.1)
    f.add_argument("--seed", type=int, default=0)
    _add_scat_flags(f, boundary_default="periodic")
    f.set_defaults(func=cmd_train)

    f = sub.add_parser("attack", help="targeted sign-gradient attack")
    f.add_argument("--model", required=True)
    f.add_argument("--image", required=True)
    f.add_argument("--target-class", type=int)
    f.add_argument("--untargeted", action="store_true")
    f.add_argument("--eps", default="0.01,0.02,0.05,0.1,0.15,0.2,0.3")
    f.add_argument("--out")
    _add_scat_flags(f, boundary_default="periodic")
    f.set_defaults(func=cmd_attack)

    f = sub.add_parser("analyze", help="angular-frequency spectrum of a model")
    f.add_argument("--model", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--keep", type=float, help="also sparsify to this kept fraction")
    f.add_argument("--sparse-out")
    f.set_defaults(func=cmd_analyze)

    f = sub.add_parser("bench", help="throughput and memory benchmark")
    f.add_argument("--sizes", type=lambda s: [int(v) for v in s.split(",")], default=[32])
    f.add_argument("--batch", type=int, default=128)
    f.add_argument("--workers", type=int, default=_default_workers())
    f.add_argument("--oracle", action="store_true", help="include the spatial-oracle row")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    _add_scat_flags(f, boundary_default="periodic")
    f.set_defaults(func=cmd_bench)

    f = sub.add_parser("selftest", help="run the invariant suite")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--report", help="JSON report path")
    f.add_argument("--inject-fault", choices=("filterbank",), help=argparse.SUPPRESS)
    f.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, MetricUndefinedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
