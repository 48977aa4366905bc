import math

import numpy as np
import pytest

from hamiltonia.ensemble import (
    BandLimitedField,
    CovarianceSpec,
    TorusPotential,
    covariance_analytic,
    covariance_table,
    ergodic_average,
    fdd_compare,
    load_json,
    rescale_potential,
    sample_field,
    sample_torus_potential,
    save_json,
    torus_indices,
)
from hamiltonia.ensemble import _covariance_matrix


def brute_value(pot, q):
    """Direct double sum over the coefficient mapping."""
    q = np.atleast_2d(q)
    out = np.zeros(q.shape[0], dtype=complex)
    for n, a in pot.coeffs.items():
        out += a * np.exp(1j * q @ np.array(n, dtype=float))
    return out / math.sqrt(pot.norm_const)


def central_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# --- torus potentials -------------------------------------------------------


def test_index_count():
    assert len(torus_indices(2, 1)) == 8
    assert len(torus_indices(3, 2)) == 5**3 - 1


def test_single_cosine_pair():
    pot = TorusPotential.from_coefficients(2, 1, {(1, 0): 0.5, (-1, 0): 0.5})
    q = np.array([[0.3, 1.1], [2.0, -0.4]])
    assert np.allclose(pot.value(q), np.cos(q[:, 0]) / math.sqrt(8), atol=1e-15)
    assert np.allclose(pot.gradient(np.zeros(2)), 0.0, atol=1e-15)


def test_matches_brute_force(rng):
    pot = sample_torus_potential(2, 3, 11)
    q = rng.uniform(0, 2 * np.pi, (7, 2))
    ref = brute_value(pot, q)
    assert np.max(np.abs(ref.imag)) < 1e-12
    assert np.allclose(pot.value(q), ref.real, atol=1e-13)


def test_realness(rng):
    worst = 0.0
    for s in range(100):
        pot = sample_torus_potential(2, 2, s)
        v = pot.evaluate(rng.uniform(0, 2 * np.pi, (1, 2)), 0, real=False)
        worst = max(worst, float(np.max(np.abs(np.imag(v)))))
    assert worst < 1e-12


def test_gradient_and_hessian_vs_differences(rng):
    pot = sample_torus_potential(2, 4, 3)
    for q in rng.uniform(0, 2 * np.pi, (5, 2)):
        g = pot.gradient(q)
        g_fd = central_grad(pot.value, q)
        assert np.max(np.abs(g - g_fd)) / np.max(np.abs(g)) < 1e-6
        H = pot.hessian(q)
        H_fd = np.stack([central_grad(lambda x: pot.gradient(x)[j], q) for j in range(2)])
        assert np.max(np.abs(H - H_fd)) / np.max(np.abs(H)) < 1e-5


def test_seed_determinism():
    a = sample_torus_potential(2, 3, (4, 9))
    b = sample_torus_potential(2, 3, (4, 9))
    c = sample_torus_potential(2, 3, (4, 10))
    assert np.array_equal(a.dense, b.dense)
    assert not np.array_equal(a.dense, c.dense)


def test_hermitian_symmetry():
    pot = sample_torus_potential(2, 2, 1)
    co = pot.coeffs
    for n, a in co.items():
        assert co[tuple(-x for x in n)] == np.conj(a)


def test_json_round_trip(tmp_path):
    pot = sample_torus_potential(2, 2, 5)
    save_json(pot, tmp_path / "p.json")
    back = load_json(tmp_path / "p.json")
    assert np.array_equal(back.dense, pot.dense)


def test_invalid_degree():
    with pytest.raises(ValueError):
        sample_torus_potential(2, 0, 1)


# --- rescaling --------------------------------------------------------------


def test_rescaled_centre_and_direct(rng):
    pot = sample_torus_potential(1, 4, 2)
    q0 = np.array([0.7])
    r = rescale_potential(pot, q0, 2.0)
    assert r.value(np.zeros(1)) == pytest.approx(float(pot.value(q0)), abs=1e-15)
    x = rng.uniform(-3, 3, (10, 1))
    assert np.max(np.abs(r.value(x) - pot.value(q0 + 2.0 * x / 4))) < 1e-14
    g_fd = central_grad(r.value, x[0])
    assert np.allclose(r.gradient(x[0]), g_fd, rtol=1e-6)


def test_rescaled_zero_potential():
    r = rescale_potential(TorusPotential.zero(2, 3), np.zeros(2), math.pi)
    assert np.all(r.value(np.random.default_rng(0).normal(size=(20, 2))) == 0)


# --- band-limited field -----------------------------------------------------


def _delta_field(d=1, N=4, cutoff=math.pi):
    b = np.zeros((2 * N + 1,) * d)
    b[(N,) * d] = 1.0
    return BandLimitedField(d, cutoff, N, b)


def test_sinc_basis_values():
    f = _delta_field()
    assert f.value(np.zeros(1)) == pytest.approx(1.0, abs=1e-15)
    # first zero of sin(cutoff x) / (cutoff x)
    assert abs(float(f.value(np.array([1.0])))) < 1e-15
    x = np.linspace(-3, 3, 13)[:, None]
    assert np.allclose(f.value(x), np.sinc(x[:, 0]), atol=1e-14)


def test_field_derivatives(rng):
    f = sample_field(2, math.pi, 6, 7)
    for x in rng.uniform(-2, 2, (4, 2)):
        g = f.gradient(x)
        assert np.max(np.abs(g - central_grad(f.value, x))) / np.max(np.abs(g)) < 1e-5
        H = f.hessian(x)
        H_fd = np.stack([central_grad(lambda y: f.gradient(y)[j], x) for j in range(2)])
        assert np.max(np.abs(H - H_fd)) / np.max(np.abs(H)) < 1e-5


def test_field_empirical_covariance():
    M = 2000
    pts = np.array([[0.0], [0.5]])
    vals = np.array([sample_field(1, math.pi, 64, (3, s)).value(pts) for s in range(M)])
    emp = vals.T @ vals / M
    k = covariance_analytic(CovarianceSpec("continuum", 1), np.array([[0.5]]))[0]
    assert abs(emp[0, 1] - k) < 4 / math.sqrt(M)
    assert abs(emp[0, 0] - 1.0) < 4 / math.sqrt(M)


# --- covariance -------------------------------------------------------------


def brute_kappa_L(d, L, cutoff, x):
    idx = torus_indices(d, L).astype(float)
    s = cutoff / L
    return np.mean(np.cos(s * np.asarray(x, dtype=float) @ idx.T), axis=-1)


@pytest.mark.parametrize("d", [1, 2])
def test_kernels_at_zero(d):
    z = np.zeros((1, d))
    assert covariance_analytic(CovarianceSpec("continuum", d), z)[0] == 1.0
    assert covariance_analytic(CovarianceSpec("torus", d, math.pi, 5), z)[0] == pytest.approx(1.0, abs=1e-15)


def test_continuum_zero():
    for lam in (1.0, math.pi, 2.5):
        x = np.array([[math.pi / lam, 0.0]])
        assert abs(covariance_analytic(CovarianceSpec("continuum", 2, lam), x)[0]) < 1e-15


def test_torus_kernel_vs_brute(rng):
    x = rng.uniform(-2, 2, (9, 2))
    k = covariance_analytic(CovarianceSpec("torus", 2, math.pi, 4), x)
    assert np.allclose(k, brute_kappa_L(2, 4, math.pi, x), atol=1e-14)


def test_kernel_derivatives(rng):
    for spec in (CovarianceSpec("torus", 2, math.pi, 6), CovarianceSpec("continuum", 2, math.pi)):
        x = rng.uniform(-1.5, 1.5, 2)
        g = np.array([covariance_analytic(spec, x[None], a)[0] for a in ((1, 0), (0, 1))])
        g_fd = central_grad(lambda y: covariance_analytic(spec, y[None])[0], x)
        assert np.max(np.abs(g - g_fd)) / np.max(np.abs(g)) < 1e-5


@pytest.mark.parametrize("d", [1, 2])
def test_sup_difference_decreasing(d):
    ax = np.linspace(-2, 2, 41 if d == 1 else 21)
    grid = np.stack(np.meshgrid(*[ax] * d, indexing="ij"), -1).reshape(-1, d)
    sups = [covariance_table(d, L, math.pi, grid)[:, -1].max() for L in (5, 10, 20)]
    assert sups[0] > sups[1] > sups[2]


def test_stationarity(rng):
    spec = CovarianceSpec("torus", 2, math.pi, 5)
    pts = rng.uniform(-2, 2, (3, 2))
    alphas = [(0, 0), (1, 0), (0, 2)]
    S = _covariance_matrix(spec, pts, alphas)
    for v in rng.uniform(-5, 5, (20, 2)):
        S2 = _covariance_matrix(spec, pts + v, alphas)
        assert np.max(np.abs(S2 - S)) < 1e-12


# --- diagnostics ------------------------------------------------------------


def test_ergodic_constant_functional():
    f = sample_field(1, math.pi, 16, 0)
    out = ergodic_average(f, lambda fld, y: np.ones(len(y)), [5, 10])
    assert np.all(out == 1.0)
    with pytest.raises(ValueError):
        ergodic_average(f, lambda fld, y: 1.0, [])


def test_ergodic_mean_zero():
    f = sample_field(1, math.pi, 256, 0)
    avg = ergodic_average(f, lambda fld, y: fld.value(y), [80])
    assert abs(avg[0]) < 0.15


def test_fdd_single_point():
    tab = fdd_compare(1, 10, [0.3], math.pi, [[0.2]], n_samples=2000, seed=4)
    assert tab.sigma_L[0, 0] == pytest.approx(1.0)
    assert tab.dev_empirical < 4 / math.sqrt(2000)


def test_fdd_dirichlet_zero():
    # x - x' = 1 is a zero of the continuum kernel; kappa^L there is O(1/L)
    tab = fdd_compare(1, 40, [0.0], math.pi, [[0.0], [1.0]], n_samples=200, seed=1)
    assert abs(tab.sigma_L[0, 1]) < 0.05
    assert abs(tab.sigma_W[0, 1]) < 1e-15


def test_fdd_limit_close():
    pts = np.array([[0.0], [0.25], [0.5]])
    tab = fdd_compare(1, 20, [1.0], math.pi, pts, n_samples=50, seed=2)
    dx = pts - pts.T
    assert np.allclose(tab.sigma_L, brute_kappa_L(1, 20, math.pi, dx[..., None]), atol=1e-14)
    assert np.allclose(tab.sigma_W, np.sinc(dx), atol=1e-14)
    assert tab.dev_limit < 0.05


def test_sample_variance_at_point():
    q = np.array([0.4, 2.1])
    vals = np.array([float(sample_torus_potential(2, 8, (6, s)).value(q)) for s in range(2000)])
    assert abs(np.mean(vals**2) - 1.0) < 0.1
