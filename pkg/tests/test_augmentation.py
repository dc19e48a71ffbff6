import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_spd
from precaug.augmentation import (
    FixedGaussianGDA,
    FixedGaussianTDA,
    GaussianMixtureGDA,
    RandomMaskTDA,
    SaltPepperTDA,
    moment_decomposition,
    sample_augmented,
    verify_decomposition,
)
from precaug.errors import InvalidScheme
from precaug.rng import RngStream


def test_zero_covariance_gda_gives_zeros(gen):
    g = sample_augmented(FixedGaussianGDA(0.0), gen.standard_normal((3, 5)), 20, 1)
    np.testing.assert_array_equal(g, 0.0)


def test_full_keep_mask_copies_columns(gen):
    x = gen.standard_normal((4, 6))
    g = sample_augmented(RandomMaskTDA(1.0), x, 30, 2)
    for col in g.T:
        assert any(np.array_equal(col, xc) for xc in x.T)


def test_tda_column_mean(gen):
    x = gen.standard_normal((3, 10))
    m, var = 100_000, 0.5
    g = sample_augmented(FixedGaussianTDA(var), x, m, 3)
    # column resampling adds the spread of x itself to the CLT scale
    spread = np.sqrt(var + x.var(axis=1))
    assert np.all(np.abs(g.mean(axis=1) - x.mean(axis=1)) <= 4 * spread / np.sqrt(m))


def test_empty_draw(gen):
    assert sample_augmented(FixedGaussianTDA(1.0), gen.standard_normal((3, 4)), 0).shape == (3, 0)


def test_table_decompositions(gen):
    x = gen.standard_normal((4, 9))
    lam = random_spd(gen, 4)
    mom = moment_decomposition(FixedGaussianGDA(lam), x)
    assert mom.beta == 0.0
    np.testing.assert_allclose(mom.lambda_g, lam, atol=1e-12)
    mom = moment_decomposition(FixedGaussianTDA(lam), x)
    assert mom.beta == 1.0
    np.testing.assert_allclose(mom.lambda_g, lam, atol=1e-12)


def test_mask_decomposition_by_hand():
    # d = 1, X = [2]: E[G^2] = 0.5 * 4 = 2 = 0.25 * 4 + 1
    mom = moment_decomposition(RandomMaskTDA(0.5), [[2.0]])
    assert mom.beta == 0.25
    assert mom.lambda_g[0, 0] == 1.0
    assert mom.conditional_covariance([[4.0]])[0, 0] == 2.0


def test_mixture_decomposition(gen):
    mu = np.array([[1.0, 0.0], [-1.0, 0.0]])
    scheme = GaussianMixtureGDA(np.array([0.5, 0.5]), mu, (0.2, 0.3))
    mom = moment_decomposition(scheme, gen.standard_normal((2, 3)))
    np.testing.assert_allclose(mom.lambda_g, np.diag([1.25, 0.25]))
    assert mom.kappa_bounds == pytest.approx((0.25, 1.25))


def test_mixture_validation():
    with pytest.raises(InvalidScheme):
        GaussianMixtureGDA(np.array([0.5, 0.5]), np.array([[1.0], [0.0]]), (1.0, 1.0))
    with pytest.raises(InvalidScheme):
        GaussianMixtureGDA(np.array([0.7, 0.7]), np.zeros((2, 1)), (1.0, 1.0))
    with pytest.raises(InvalidScheme):
        GaussianMixtureGDA(np.array([1.0]), np.zeros((1, 1)), (1.0, 1.0))


@pytest.mark.parametrize(
    "make",
    [
        lambda: FixedGaussianGDA(-1.0),
        lambda: FixedGaussianTDA(np.diag([1.0, -1.0])),
        lambda: RandomMaskTDA(0.0),
        lambda: RandomMaskTDA(1.5),
        lambda: SaltPepperTDA(0.5, -1.0),
    ],
)
def test_invalid_parameters(make):
    with pytest.raises(InvalidScheme):
        make()


def test_verify_examples(gen):
    x5 = gen.standard_normal((5, 30))
    assert verify_decomposition(FixedGaussianGDA(1.0), x5, 200_000, 1) < 0.03
    x10 = gen.standard_normal((10, 100))
    assert verify_decomposition(RandomMaskTDA(1.0), x10, 100_000, 2) < 0.05
    assert verify_decomposition(SaltPepperTDA(0.7, 0.5), x10, 200_000, 3) < 0.05


def test_verify_rejects_small_budget(gen):
    with pytest.raises(ValueError):
        verify_decomposition(FixedGaussianGDA(1.0), gen.standard_normal((2, 3)), 999)


def test_sampling_is_deterministic(gen):
    x = gen.standard_normal((3, 8))
    for scheme in (FixedGaussianTDA(0.3), RandomMaskTDA(0.6), SaltPepperTDA(0.6, 1.0)):
        a = sample_augmented(scheme, x, 50, RngStream(9))
        b = sample_augmented(scheme, x, 50, RngStream(9))
        np.testing.assert_array_equal(a, b)


@given(st.floats(0.05, 1.0), st.floats(0.0, 3.0), st.integers(0, 2**32 - 1))
def test_decomposition_psd(rho, var, seed):
    x = np.random.default_rng(seed).standard_normal((4, 7))
    for scheme in (RandomMaskTDA(rho), SaltPepperTDA(rho, var)):
        mom = moment_decomposition(scheme, x)
        assert 0 <= mom.beta <= 1
        assert mom.kappa_bounds[0] >= -1e-12
