import numpy as np
import pytest

from scatkit import (
    BoundaryMode,
    InvalidInputError,
    LinearModel,
    ScatteringConfig,
    TrainConfig,
    angular_spectrum,
    build_filterbank,
    fgsm_attack,
    predict,
    read_slm1,
    sparsify_angular,
    train_linear,
    write_slm1,
)
from scatkit.classify import spectral_flatness, _order1_block, _unit_normalized_rows
from scatkit.datasets import texture_dataset
from scatkit.fourier import Arena
from scatkit.scattering import ScatteringCoeffs, path_table, transform_image


def _toy_coeffs(vec, J=2, L=2):
    paths = tuple(path_table(J, L))
    data = np.zeros((1, len(paths), 2, 2), np.float64)
    data[0, :, 0, 0] = vec[: len(paths)]
    return ScatteringCoeffs(data, paths, J, L)


def _toy_model(J=2, L=2, classes=2, spatial=2, seed=0):
    paths = tuple(path_table(J, L))
    rng = np.random.default_rng(seed)
    return LinearModel(
        weights=rng.standard_normal((classes, 1, len(paths), spatial, spatial)).astype(np.float32),
        bias=np.zeros(classes, np.float32),
        J=J,
        L=L,
        paths=paths,
        feat_mean=np.zeros((1, len(paths)), np.float32),
        feat_scale=np.ones((1, len(paths)), np.float32),
    )


def test_separable_toy_reaches_full_accuracy(rng):
    feats = []
    for i in range(40):
        v = rng.normal(0, 0.1, 9)
        v[0] += 1.0 if i % 2 == 0 else -1.0
        feats.append((_toy_coeffs(v), i % 2))
    model = train_linear(feats, 2, TrainConfig(epochs=60), seed=0)
    acc = np.mean([predict(model, f)[0] == y for f, y in feats])
    assert acc == 1.0


def test_training_is_deterministic(rng):
    feats = [(_toy_coeffs(rng.normal(0, 1, 9)), i % 3) for i in range(30)]
    a = train_linear(feats, 3, TrainConfig(epochs=5), seed=42)
    b = train_linear(feats, 3, TrainConfig(epochs=5), seed=42)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)


def test_train_validation(rng):
    with pytest.raises(InvalidInputError):
        train_linear([], 2)
    with pytest.raises(InvalidInputError):
        train_linear([(_toy_coeffs(np.zeros(9)), 5)], 2)


def test_predict_bias_only_model():
    model = _toy_model()
    model.weights[:] = 0.0
    model.bias[:] = np.array([1.0, 0.0], np.float32)
    cls, scores = predict(model, _toy_coeffs(np.arange(9)))
    assert cls == 0 and scores[0] > scores[1]


def test_predict_invariant_to_bias_shift(rng):
    model = _toy_model(seed=1)
    coeffs = _toy_coeffs(rng.normal(0, 1, 9))
    cls1, s1 = predict(model, coeffs)
    model.bias += np.float32(5.0)
    cls2, s2 = predict(model, coeffs)
    assert cls1 == cls2
    assert np.allclose(s2 - s1, 5.0, atol=1e-5)


def test_predict_matches_independent_dot_product(rng):
    model = _toy_model(seed=2)
    coeffs = _toy_coeffs(rng.normal(0, 1, 9))
    _, scores = predict(model, coeffs)
    feat = (coeffs.data - model.feat_mean[..., None, None]) / model.feat_scale[..., None, None]
    for k in range(model.classes):
        manual = float(np.sum(model.weights[k].astype(np.float64) * feat)) + float(model.bias[k])
        assert abs(manual - scores[k]) < 1e-5


def test_predict_ties_break_to_lowest_index():
    model = _toy_model()
    model.weights[:] = 0.0
    model.bias[:] = 0.0
    cls, _ = predict(model, _toy_coeffs(np.zeros(9)))
    assert cls == 0


def test_standardization_makes_argmax_scale_invariant(rng):
    # scaling features consistently at train and test time must not change argmax
    feats = [(_toy_coeffs(rng.normal(0, 1, 9)), i % 2) for i in range(30)]
    scaled = [
        (ScatteringCoeffs(5.0 * c.data, c.paths, c.J, c.L), y) for c, y in feats
    ]
    m1 = train_linear(feats, 2, TrainConfig(epochs=10), seed=0)
    m2 = train_linear(scaled, 2, TrainConfig(epochs=10), seed=0)
    for (c1, _), (c2, _) in zip(feats, scaled):
        assert predict(m1, c1)[0] == predict(m2, c2)[0]


# ---------------------------------------------------------------------------
# angular analysis

def test_omega1_constant_in_angle_concentrates_at_zero():
    model = _toy_model(J=2, L=4)
    rows = [i for i, p in enumerate(model.paths) if p.order == 1]
    model.weights[:, :, rows] = 1.0
    spec = angular_spectrum(model)
    assert spec.omega1[0] > 0
    assert np.abs(spec.omega1[1:]).max() < 1e-10


def test_omega1_parseval(rng):
    model = _toy_model(J=2, L=4, seed=3)
    spec = angular_spectrum(model)
    w = _unit_normalized_rows(model)
    block = _order1_block(model, w)
    assert abs(spec.omega1.sum() - (block**2).sum()) / (block**2).sum() < 1e-5
    # omega2 energy equals its block norm as well
    from scatkit.classify import _order2_block

    block2 = _order2_block(model, w)
    assert abs(spec.omega2.sum() - (block2**2).sum()) / (block2**2).sum() < 1e-5


def test_omega1_phase_ramp_concentrates_at_that_frequency():
    L = 8
    model = _toy_model(J=1, L=L)
    rows = [i for i, p in enumerate(model.paths) if p.order == 1]
    m = 3
    ramp_re = np.cos(2 * np.pi * m * np.arange(L) / L)
    ramp_im = np.sin(2 * np.pi * m * np.arange(L) / L)
    model.weights[:] = 0.0
    model.weights[0, 0, rows, 0, 0] = ramp_re.astype(np.float32)
    model.weights[1, 0, rows, 0, 0] = ramp_im.astype(np.float32)
    spec = angular_spectrum(model)
    mask = np.ones(L, bool)
    mask[[m, L - m]] = False  # real signals split the ramp over +-m
    assert spec.omega1[m] + spec.omega1[L - m] > 0.99 * spec.omega1.sum()
    assert spec.omega1[mask].max() < 1e-10


def test_sparsify_keep_one_is_identity(rng):
    model = _toy_model(J=2, L=4, seed=4)
    out, stats = sparsify_angular(model, 1.0)
    assert np.abs(out.weights - model.weights).max() < 1e-6
    assert stats["achieved_sparsity"] == 0.0


def test_sparsify_zero_fraction_guarantee(rng):
    model = _toy_model(J=2, L=4, seed=5)
    for keep in (0.5, 0.2, 0.05):
        _, stats = sparsify_angular(model, keep)
        assert stats["achieved_sparsity"] >= 1.0 - keep
    with pytest.raises(InvalidInputError):
        sparsify_angular(model, 0.0)
    with pytest.raises(InvalidInputError):
        sparsify_angular(model, 1.2)


def test_sparsify_keeps_weights_real_and_order0_untouched(rng):
    model = _toy_model(J=2, L=4, seed=6)
    out, _ = sparsify_angular(model, 0.3)
    assert out.weights.dtype == model.weights.dtype
    assert np.array_equal(out.weights[:, :, 0], model.weights[:, :, 0])


@pytest.fixture(scope="module")
def texture_probe():
    cfg = ScatteringConfig(J=2, L=8, boundary=BoundaryMode.PERIODIC)
    fb = build_filterbank(32, cfg.J, cfg.L, cfg.resolved_params)
    arena = Arena()
    train_imgs, train_y = texture_dataset(12, size=32, seed=1)
    feats = [transform_image(im, cfg, fb, arena)[0] for im in train_imgs]
    model = train_linear(list(zip(feats, train_y)), 10, TrainConfig(epochs=30), seed=0)
    return cfg, fb, model, feats, train_y


def test_trained_spectrum_flatter_after_permutation(texture_probe, rng):
    _, _, model, _, _ = texture_probe
    spec = angular_spectrum(model)
    permuted = LinearModel(
        weights=model.weights.copy(),
        bias=model.bias,
        J=model.J,
        L=model.L,
        paths=model.paths,
        feat_mean=model.feat_mean,
        feat_scale=model.feat_scale,
    )
    rows = [i for i, p in enumerate(model.paths) if p.order == 1]
    w = permuted.weights
    blk = w[:, :, rows].reshape(w.shape[0], w.shape[1], model.J, model.L, *w.shape[3:])
    for k in range(blk.shape[0]):
        for j in range(model.J):
            blk[k, 0, j] = blk[k, 0, j][rng.permutation(model.L)]
    w[:, :, rows] = blk.reshape(w.shape[0], w.shape[1], len(rows), *w.shape[3:])
    spec_p = angular_spectrum(permuted)
    assert spectral_flatness(spec.omega1) < spectral_flatness(spec_p.omega1)


def test_fgsm_contract(texture_probe):
    cfg, fb, model, feats, labels = texture_probe
    imgs, _ = texture_dataset(2, size=32, seed=9)
    grid = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5]
    successes = 0
    for im in imgs[:6]:
        coeffs, _ = transform_image(im, cfg, fb)
        cur, scores = predict(model, coeffs)
        target = int(np.argsort(scores)[-2])
        eps, adv = fgsm_attack(model, fb, cfg, im, target, grid)
        if eps is None:
            continue
        successes += 1
        adv_coeffs, _ = transform_image(adv, cfg, fb)
        assert predict(model, adv_coeffs)[0] == target
        # first-hit semantics: the grid truncated below eps finds nothing
        k = grid.index(eps)
        if k > 0:
            none_eps, none_img = fgsm_attack(model, fb, cfg, im, target, grid[:k])
            assert none_eps is None and none_img is None
    assert successes >= 1


def test_fgsm_untargeted_flips_the_label(texture_probe):
    cfg, fb, model, feats, labels = texture_probe
    imgs, _ = texture_dataset(2, size=32, seed=21)
    grid = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5]
    flipped = 0
    for im in imgs[:4]:
        coeffs, _ = transform_image(im, cfg, fb)
        cur, _ = predict(model, coeffs)
        eps, adv = fgsm_attack(model, fb, cfg, im, None, grid)
        if eps is None:
            continue
        adv_coeffs, _ = transform_image(adv, cfg, fb)
        assert predict(model, adv_coeffs)[0] != cur
        flipped += 1
    assert flipped >= 1


def test_fgsm_rejects_target_equal_current(texture_probe):
    cfg, fb, model, feats, labels = texture_probe
    imgs, _ = texture_dataset(1, size=32, seed=12)
    coeffs, _ = transform_image(imgs[0], cfg, fb)
    cur, _ = predict(model, coeffs)
    with pytest.raises(InvalidInputError):
        fgsm_attack(model, fb, cfg, imgs[0], cur, [0.1])


def test_slm1_roundtrip_byte_identical(tmp_path, rng):
    model = _toy_model(J=2, L=4, seed=7)
    p1, p2 = tmp_path / "a.slm1", tmp_path / "b.slm1"
    write_slm1(p1, model)
    loaded = read_slm1(p1)
    write_slm1(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(loaded.weights, model.weights)
    assert np.array_equal(loaded.feat_scale, model.feat_scale)


def test_sparsify_keep_one_keeps_predictions(texture_probe):
    _, _, model, feats, labels = texture_probe
    same, _ = sparsify_angular(model, 1.0)
    for f in feats[:10]:
        assert predict(same, f)[0] == predict(model, f)[0]


def test_scattering_probe_beats_raw_pixels(texture_probe):
    cfg, fb, model, feats_tr, train_y = texture_probe
    test_imgs, test_y = texture_dataset(8, size=32, seed=5)
    arena = Arena()
    feats_te = [transform_image(im, cfg, fb, arena)[0] for im in test_imgs]
    acc = np.mean([predict(model, f)[0] == y for f, y in zip(feats_te, test_y)])

    def as_pixels(im):
        return ScatteringCoeffs(im.data[:, None], (path_table(1, 1)[0],), cfg.J, cfg.L)

    train_imgs, _ = texture_dataset(12, size=32, seed=1)
    pix_model = train_linear(
        [(as_pixels(im), y) for im, y in zip(train_imgs, train_y)],
        10,
        TrainConfig(epochs=30),
        seed=0,
    )
    acc_pix = np.mean(
        [predict(pix_model, as_pixels(im))[0] == y for im, y in zip(test_imgs, test_y)]
    )
    assert acc >= acc_pix + 0.05
