"""Both kernel backends must agree regardless of which one is active."""
import numpy as np
import pytest

from klist import kernels
from klist._backend import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba backend disabled")


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    return rng.standard_normal((3000, 3)), rng.standard_normal((17, 3))


def _brute(x, c):
    dist = ((x[:, None, :] - c[None]) ** 2).sum(-1)
    return dist.argmin(1), dist.min(1)


def test_nearest_matches_brute(data):
    x, c = data
    lab, sq = kernels.nearest(x, c)
    blab, bsq = _brute(x, c)
    assert np.array_equal(lab, blab)
    assert np.allclose(sq, bsq, rtol=1e-12, atol=1e-14)


def test_nearest_1d_matches_brute_with_duplicates():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2000)
    c = np.array([0.5, -1.0, 0.5, 2.0, -1.0, 0.0])
    lab, sq = kernels.nearest_1d(x, c)
    blab, bsq = _brute(x[:, None], c[:, None])
    assert np.array_equal(lab, blab)
    assert np.array_equal(sq, bsq)


def test_numpy_fallbacks_agree(data):
    x, c = data
    lab, sq = kernels._np_nearest(x, c)
    blab, bsq = _brute(x, c)
    assert np.array_equal(lab, blab)
    assert np.allclose(sq, bsq, rtol=1e-12)
    l1, s1 = kernels._np_nearest_1d(x[:, 0], c[:, 0])
    b1, bs1 = _brute(x[:, :1], c[:, :1])
    assert np.array_equal(l1, b1) and np.array_equal(s1, bs1)


@needs_numba
def test_backends_agree(data):
    x, c = data
    for nb_fn, np_fn, args in [
        (kernels._nb_nearest, kernels._np_nearest, (x, c)),
        (kernels._nb_nearest_1d, kernels._np_nearest_1d, (x[:, 0], c[:, 0])),
    ]:
        a, b = nb_fn(*args), np_fn(*args)
        assert np.array_equal(a[0], b[0])
        assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-15)
    lab = kernels._np_nearest(x, c)[0]
    s1, n1 = kernels._nb_centroid_sums(x, lab, c.shape[0])
    s2, n2 = kernels._np_centroid_sums(x, lab, c.shape[0])
    assert np.array_equal(n1, n2) and np.allclose(s1, s2, rtol=1e-12)

    noise = np.random.default_rng(2).standard_normal((x.shape[0], 5, 3))
    o1 = np.full(x.shape[0], np.inf)
    o2 = o1.copy()
    kernels._nb_min_agent_sqerr(x, noise, 0.3, o1)
    kernels._np_min_agent_sqerr(x, noise, 0.3, o2)
    assert np.allclose(o1, o2, rtol=1e-12)


@needs_numba
def test_hamerly_pass_matches_exhaustive(data):
    from klist.quantizer import _half_separation

    x, c = data
    n = x.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    upper = np.full(n, np.inf)
    lower = np.zeros(n)
    sq = np.empty(n)
    kernels._nb_hamerly_assign(x, c, labels, upper, lower, _half_separation(c), sq)
    blab, bsq = _brute(x, c)
    assert np.array_equal(labels, blab)
    # move centroids a little, loosen bounds by the shifts, and reassign
    c2 = c + 0.01 * np.random.default_rng(3).standard_normal(c.shape)
    shift = np.linalg.norm(c2 - c, axis=1)
    upper += shift[labels]
    lower -= shift.max()
    kernels._nb_hamerly_assign(x, c2, labels, upper, lower, _half_separation(c2), sq)
    blab, bsq = _brute(x, c2)
    assert np.array_equal(labels, blab)
    assert np.allclose(sq, bsq, rtol=1e-12)


def test_min_agent_sqerr_definition():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((50, 2))
    noise = rng.standard_normal((50, 7, 2))
    out = np.full(50, np.inf)
    kernels.min_agent_sqerr(x, noise, 0.6, out)
    y = x[:, None, :] + noise
    ref = ((x[:, None, :] - 0.6 * y) ** 2).sum(-1).min(1)
    assert np.allclose(out, ref, rtol=1e-13)


_PIPELINE = (
    "import json; from klist._backend import BACKEND; from klist.model import GaussianModel;"
    "from klist.montecarlo import estimate_d1, estimate_d2, fit_unit_codebook; from klist.quantizer import FitConfig;"
    "from klist.rng import Seed; m = GaussianModel(3, 1.0, 1.0);"
    "cb = fit_unit_codebook(3, 6, FitConfig(n_train=4000, restarts=2), Seed(1));"
    "a = estimate_d1(m, 6, 2000, seed=Seed(2), codebook=cb.scaled(m.posterior_var ** 0.5));"
    "b = estimate_d2(m, 6, 2000, Seed(3));"
    "print(json.dumps([BACKEND, cb.train_distortion, a.mean, b.mean]))"
)


def _pipeline(flag):
    import json
    import os
    import subprocess
    import sys

    env = dict(os.environ, KLIST_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", _PIPELINE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@needs_numba
def test_env_flag_switches_backend_with_same_results():
    fast, slow = _pipeline("0"), _pipeline("1")
    assert fast[0] == "numba" and slow[0] == "numpy"
    assert np.allclose(fast[1:], slow[1:], rtol=1e-10)
