import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from precaug.errors import InvalidSpec
from precaug.linalg import SymEig, sample_covariance
from precaug.parallel import THREADS_ENV, default_threads, pmap
from precaug.rng import RngStream, as_stream
from precaug.synth import NoiseSpec, Population, SigmaSpec, build_sigma, random_orthogonal, sample_data


def test_stream_determinism_and_independence():
    a = RngStream(7).spawn(3).generator().standard_normal(5)
    b = RngStream(7).spawn(3).generator().standard_normal(5)
    c = RngStream(7).spawn(4).generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_validation():
    with pytest.raises(ValueError):
        RngStream(-1)
    assert as_stream(None) == RngStream(0)
    assert as_stream(5) == RngStream(5)


@given(st.lists(st.integers(-50, 50), max_size=30), st.integers(1, 8))
def test_pmap_preserves_order(items, threads):
    assert pmap(lambda v: v * v, items, threads) == [v * v for v in items]


def test_default_threads(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "4")
    assert default_threads() == 4
    monkeypatch.setenv(THREADS_ENV, "nonsense")
    assert default_threads() == 1


def test_sigma_families():
    np.testing.assert_array_equal(build_sigma(SigmaSpec("identity", 3)), np.eye(3))
    np.testing.assert_array_equal(build_sigma(SigmaSpec("ar1", 2, r=0.5)), [[1, 0.5], [0.5, 1]])
    np.testing.assert_array_equal(build_sigma(SigmaSpec("scaled", 2, scale=4.0)), 4 * np.eye(2))


def test_spectrum_round_trip():
    eig = SymEig.of(build_sigma(SigmaSpec("spectrum", 3, spectrum=(1.0, 2.0, 4.0), seed=9)))
    assert eig.min == pytest.approx(1.0, abs=1e-10)
    assert eig.max == pytest.approx(4.0, abs=1e-10)


def test_spiked():
    w = np.linalg.eigvalsh(build_sigma(SigmaSpec("spiked", 6, bulk=1.0, spikes=(5.0, 3.0))))
    np.testing.assert_allclose(w, [1, 1, 1, 1, 3, 5], atol=1e-10)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "scaled", "d": 2, "scale": 0.0},
        {"kind": "ar1", "d": 2, "r": 1.0},
        {"kind": "spectrum", "d": 2, "spectrum": (1.0,)},
        {"kind": "spectrum", "d": 2, "spectrum": (1.0, -1.0)},
        {"kind": "spiked", "d": 1, "spikes": (2.0, 3.0)},
        {"kind": "bogus", "d": 2},
        {"kind": "identity", "d": 0},
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        SigmaSpec(**kwargs)


def test_orthogonal():
    q = random_orthogonal(6, 1)
    np.testing.assert_allclose(q @ q.T, np.eye(6), atol=1e-12)


def test_sample_data_deterministic():
    a = sample_data(np.eye(4), 10, rng=RngStream(3))
    b = sample_data(np.eye(4), 10, rng=RngStream(3))
    np.testing.assert_array_equal(a, b)


def test_rademacher_scaling():
    x = sample_data(4 * np.eye(1), 500, NoiseSpec("rademacher"), rng=1)
    assert set(np.unique(x)) == {-2.0, 2.0}


@pytest.mark.parametrize("dist", ["gaussian", "rademacher", "uniform"])
def test_unit_variance_noise(dist):
    z = NoiseSpec(dist).draw(RngStream(2).generator(), (200_000,))
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.02


def test_non_pd_sigma_rejected():
    with pytest.raises(InvalidSpec):
        sample_data(np.diag([1.0, 0.0]), 5)


def test_law_of_large_numbers():
    sigma = build_sigma(SigmaSpec("ar1", 8, r=0.6))
    x = Population(sigma).sample(200_000, RngStream(4))
    assert np.linalg.norm(sample_covariance(x) - sigma) / np.linalg.norm(sigma) < 0.02
