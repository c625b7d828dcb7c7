import numpy as np
import pytest

from scatkit import InvalidInputError, dft2, idft2, modulus, periodize, pointwise_mul


def test_dft_of_impulse_is_flat():
    g = np.zeros((8, 8), np.complex128)
    g[0, 0] = 1.0
    assert np.allclose(dft2(g), 1.0, atol=1e-12)


def test_dft_of_constant_concentrates_at_dc():
    g = np.full((8, 8), 0.3 + 0.0j)
    s = dft2(g)
    assert abs(s[0, 0] - 64 * 0.3) < 1e-10
    s[0, 0] = 0.0
    assert np.abs(s).max() < 1e-10


def test_roundtrip_single_precision(rng):
    g = (rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))).astype(
        np.complex64
    )
    back = idft2(dft2(g))
    assert np.abs(back - g).max() < 1e-6


def test_idft_of_flat_spectrum_is_impulse():
    s = np.ones((8, 8), np.complex128)
    g = idft2(s)
    assert abs(g[0, 0] - 1.0) < 1e-12
    g[0, 0] = 0.0
    assert np.abs(g).max() < 1e-12


def test_idft_linearity(rng):
    s = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert np.allclose(idft2(3.5 * s), 3.5 * idft2(s), atol=1e-12)


def test_rejects_non_power_of_two():
    with pytest.raises(InvalidInputError):
        dft2(np.zeros((6, 6), np.complex128))
    with pytest.raises(InvalidInputError):
        idft2(np.zeros((8, 6), np.complex128))


def test_periodize_k0_identity(rng):
    s = rng.standard_normal((8, 8)) + 0j
    assert np.array_equal(periodize(s, 0), s)


def test_periodize_constant(rng):
    s = np.full((16, 16), 2.5 + 0.5j)
    out = periodize(s, 2)
    assert out.shape == (4, 4)
    assert np.allclose(out, 2.5 + 0.5j, atol=1e-12)


def test_periodize_matches_spatial_subsampling(rng):
    # independent oracle: direct subsampling in the spatial domain
    x = rng.standard_normal((16, 16)) + 0j
    via_fourier = idft2(periodize(dft2(x), 2))
    assert np.abs(via_fourier - x[::4, ::4]).max() < 1e-6


def test_periodize_requires_divisibility():
    with pytest.raises(InvalidInputError):
        periodize(np.zeros((8, 8), np.complex128), 4)


def test_pointwise_mul_identity_and_zero(rng):
    a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert np.array_equal(pointwise_mul(a, np.ones_like(a)), a)
    assert np.all(pointwise_mul(np.zeros_like(a), a) == 0)


def test_pointwise_mul_commutes(rng):
    a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    b = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert np.allclose(pointwise_mul(a, b), pointwise_mul(b, a), atol=1e-14)


def test_pointwise_mul_size_mismatch(rng):
    with pytest.raises(InvalidInputError):
        pointwise_mul(np.zeros((8, 8)), np.zeros((4, 4)))


def test_modulus_pythagoras():
    z = np.array([[3.0 + 4.0j]])
    out = modulus(z)
    assert out[0, 0] == 5.0 and out[0, 0].imag == 0.0


def test_modulus_fixes_nonnegative_reals(rng):
    g = np.abs(rng.standard_normal((8, 8))) + 0j
    assert np.allclose(modulus(g), g, atol=1e-14)


def test_modulus_preserves_l2(rng):
    g = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    assert abs(np.linalg.norm(modulus(g)) - np.linalg.norm(g)) < 1e-10


def test_parseval(rng):
    g = (rng.standard_normal((32, 32)) + 1j * rng.standard_normal((32, 32))).astype(
        np.complex64
    )
    lhs = np.linalg.norm(dft2(g)) ** 2
    rhs = 32 * 32 * np.linalg.norm(g) ** 2
    assert abs(lhs - rhs) / rhs < 1e-5


def test_periodize_contracts_energy(rng):
    for _ in range(5):
        s = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        assert np.linalg.norm(periodize(s, 1)) <= np.linalg.norm(s) + 1e-12


def test_modulus_non_expansive(rng):
    for _ in range(5):
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        assert np.linalg.norm(modulus(a) - modulus(b)) <= np.linalg.norm(a - b) + 1e-12
