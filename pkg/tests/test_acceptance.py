"""Acceptance checks, one test per criterion.

Each test records a one-line ``detail`` property; ``conftest.py`` prints a
``criterion N: PASS|FAIL`` line per test at the end of the session.  Run
alone with ``python3 -m pytest tests/test_acceptance.py`` (the survey
criteria take most of an hour on a single core; ``HAMILTONIA_JOBS`` sets the
worker count).
"""

import math
import os
import time

import numpy as np
import pytest

from hamiltonia.chaos import CHAOTIC, REGULAR, Thresholds, classify, ftle, phase_near, tangent_indicators
from hamiltonia.dynamics import PhaseState, TangentBundleState, integrate, integrate_tangent, symplectic_defect
from hamiltonia.ensemble import (
    CovarianceSpec,
    covariance_analytic,
    ergodic_average,
    fdd_compare,
    sample_field,
    sample_torus_potential,
)
from hamiltonia.model import (
    ModelParams,
    ModelPotential,
    melnikov_grad_closed,
    melnikov_grad_quadrature,
    pendulum_action,
    pendulum_energy,
)
from hamiltonia.potential import HarmonicPotential
from hamiltonia.rng import RngSeed, generator
from hamiltonia.survey import rescaling_check, run_survey
from hamiltonia.tori import Budget, DiophantineParams, Region, _rejection_sample, torus_fraction

OMEGA = Region([-5, -5], [5, 5], 5.0, lambda q, p: np.sum(q * q, -1) + np.sum(p * p, -1) < 25)
BAND = (2.2, 2.8)
JOBS = int(os.environ.get("HAMILTONIA_JOBS", os.cpu_count() or 1))


def report(record_property, criterion, detail):
    record_property("criterion", criterion)
    record_property("detail", detail)


# 1 ---------------------------------------------------------------------------


def test_c1_melnikov_oracle(record_property):
    rng = generator(RngSeed(101))
    t0 = time.perf_counter()
    err = 0.0
    for _ in range(50):
        I0, th, tau = rng.uniform(0.1, 4.0), rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi)
        sign = int(rng.choice([-1, 1]))
        q = melnikov_grad_quadrature(I0, th, tau, sign, T=40.0)
        err = max(err, abs(q - melnikov_grad_closed(I0, th, tau, sign)))
    dt = time.perf_counter() - t0
    report(record_property, 1, f"max abs error {err:.2e} (< 1e-6), {dt:.1f} s (< 10 s)")
    assert err < 1e-6
    assert dt < 10


# 2 ---------------------------------------------------------------------------


def test_c2_covariance_convergence(record_property):
    t0 = time.perf_counter()
    sups = {}
    for d in (1, 2):
        ax = np.linspace(-3.0, 3.0, 61 if d == 1 else 25)
        grid = np.stack(np.meshgrid(*[ax] * d, indexing="ij"), axis=-1).reshape(-1, d)
        kw = covariance_analytic(CovarianceSpec("continuum", d), grid)
        sups[d] = [float(np.max(np.abs(covariance_analytic(CovarianceSpec("torus", d, math.pi, L), grid) - kw)))
                   for L in (5, 10, 20)]
    tol = 4 / math.sqrt(2000)
    emp = [fdd_compare(1, 10, [0.3], math.pi, [[0.0], [0.4], [1.1]], n_samples=2000, seed=21).dev_empirical,
           fdd_compare(2, 10, [0.3, 1.0], math.pi, [[0.0, 0.0], [0.5, 0.0], [0.3, 0.8]], n_samples=2000,
                       seed=22).dev_empirical]
    dt = time.perf_counter() - t0
    sup_txt = "; ".join(f"d={d} sup " + ", ".join(f"{v:.3g}" for v in s) for d, s in sups.items())
    report(record_property, 2, f"{sup_txt}; empirical dev {max(emp):.3f} (< {tol:.3f}); {dt:.0f} s")
    for s in sups.values():
        assert s[0] > s[1] > s[2]
    assert max(emp) < tol
    assert dt < 120


# 3 ---------------------------------------------------------------------------


def test_c3_integrator(record_property):
    t0 = time.perf_counter()
    model = ModelPotential(ModelParams(2, 0.05))
    s0 = PhaseState([0.3, 1.0], [0.8, 0.4])
    ref = integrate(s0, 10.0, 1e-3, model, "order4", record_every=10000)

    def err(h, scheme):
        tr = integrate(s0, 10.0, h, model, scheme, record_every=int(round(10 / h)))
        return np.max(np.abs(np.r_[tr.q[-1] - ref.q[-1], tr.p[-1] - ref.p[-1]]))

    e2 = [err(h, "leapfrog") for h in (0.02, 0.01, 0.005)]
    e4 = [err(h, "order4") for h in (0.1, 0.05, 0.025)]
    r2 = [a / b for a, b in zip(e2, e2[1:])]
    r4 = [a / b for a, b in zip(e4, e4[1:])]
    defect = max(symplectic_defect(integrate_tangent(TangentBundleState.identity(s0), 0.01, 0.01, model, s).M)
                 for s in ("leapfrog", "order4"))
    dt = time.perf_counter() - t0
    report(record_property, 3, f"order-2 ratios {r2[0]:.3f}, {r2[1]:.3f}; order-4 ratios {r4[0]:.2f}, {r4[1]:.2f}; "
           f"one-step defect {defect:.1e}; {dt:.0f} s")
    assert all(3.5 <= r <= 4.5 for r in r2)
    assert all(14 <= r <= 18 for r in r4)
    assert defect < 1e-8
    assert dt < 60


# 4 ---------------------------------------------------------------------------


def test_c4_model_coexistence(record_property, tangle):
    t0 = time.perf_counter()
    tg = tangle(0.05)
    crossings_ok = (len(tg.crossings) >= 1 and all(c.angle > 1e-3 for c in tg.crossings)
                    and all(phase_near(ph) for ph in tg.phases))
    est = torus_fraction(ModelPotential(ModelParams(2, 0.05)), OMEGA, BAND, 128, 5, Budget(t_total=1000.0))
    on = est.labels == REGULAR
    dio_ok = bool(np.all(est.analysis.margin[on] >= DiophantineParams().gamma))
    E = pendulum_energy(est.p[:, 1], est.q[:, 1])
    lib = E[(E > 0) & (E < 2)]
    fpp = np.array([pendulum_action(e).Fpp for e in lib])
    dt = time.perf_counter() - t0
    report(record_property, 4,
           f"{len(tg.crossings)} crossings, min angle {min(c.angle for c in tg.crossings):.2e}, "
           f"phases {', '.join(f'{p:+.3f}' for p in tg.phases)}; torus fraction {est.fraction:.3f} "
           f"CI [{est.ci[0]:.3f}, {est.ci[1]:.3f}], Diophantine {dio_ok}; min |F''| {np.min(np.abs(fpp)):.3f} over "
           f"I in [{pendulum_action(lib.min()).I:.3f}, {pendulum_action(lib.max()).I:.3f}]; {dt:.0f} s")
    assert crossings_ok
    assert 0.05 < est.fraction < 0.95 and dio_ok
    assert np.min(np.abs(fpp)) > 1e-3
    assert dt < 600


# 5 ---------------------------------------------------------------------------


def test_c5_rescaling_identity(record_property):
    t0 = time.perf_counter()
    pot = sample_torus_potential(2, 6, 8)
    st = PhaseState([0.3, 0.4], [0.5, -0.7])
    dev = [rescaling_check(pot, [1.0, 2.0], math.pi, st, 10.0, h).deviation for h in (1e-3, 5e-4)]
    ratio = dev[0] / dev[1]
    dt = time.perf_counter() - t0
    report(record_property, 5, f"deviation {dev[0]:.2e} at h=1e-3, {dev[1]:.2e} at h=5e-4 (< 1e-6); "
           f"halving ratio {ratio:.2f} (want about 4); {dt:.0f} s")
    assert max(dev) < 1e-6
    assert 3.5 <= ratio <= 4.5
    assert dt < 60


# 6 and 7 ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def default_survey():
    t0 = time.perf_counter()
    res = run_survey(seed=0, jobs=JOBS)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def calibrated_survey():
    # negative-energy band: trapped wells hold tori, saddle regions carry chaos
    t0 = time.perf_counter()
    res = run_survey(energy_band=(-2.0, -0.5), seed=0, jobs=JOBS, p_max=2.65)
    return res, time.perf_counter() - t0


def _trend(record_property, criterion, res, dt, label):
    f = res.success_freq
    report(record_property, criterion, f"{label}: success frequency "
           + ", ".join(f"L={L} {v:.2f}" for L, v in f.items()) + f" (nondecreasing, > 0.6 at 12); {dt / 60:.0f} min")
    v = [f[L] for L in (3, 6, 12)]
    assert v[0] <= v[1] <= v[2]
    assert v[2] > 0.6


def _counts(record_property, criterion, res, label):
    rows = {r["L"]: r for r in res.summary()}
    growth = rows[12]["mean_chaos_count"] / max(rows[6]["mean_chaos_count"], 1e-300)
    vols = [rows[L]["mean_tori_volume"] for L in (3, 6, 12)]
    spread = max(vols) / min(vols) if min(vols) > 0 else math.inf
    report(record_property, criterion, f"{label}: mean chaos count "
           + ", ".join(f"L={L} {rows[L]['mean_chaos_count']:.2f}" for L in (3, 6, 12))
           + f" (growth 6->12 {growth:.2f}, want >= 2); tori volume "
           + ", ".join(f"{v:.3g}" for v in vols) + f" (max/min {spread:.2f}, want <= 2)")
    assert growth >= 2
    assert spread <= 2


def test_c6_trend_default_band(record_property, default_survey):
    _trend(record_property, 6, *default_survey, "band (1.5, 3.0)")


def test_c7_counting_default_band(record_property, default_survey):
    _counts(record_property, 7, default_survey[0], "band (1.5, 3.0)")


def test_c6_trend_calibrated_band(record_property, calibrated_survey):
    _trend(record_property, "6 (calibrated band)", *calibrated_survey, "band (-2, -0.5), |p| <= 2.65")


def test_c7_counting_calibrated_band(record_property, calibrated_survey):
    _counts(record_property, "7 (calibrated band)", calibrated_survey[0], "band (-2, -0.5), |p| <= 2.65")


# 8 ---------------------------------------------------------------------------


def test_c8_indicator_ground_truth(record_property):
    t0 = time.perf_counter()
    T = 1000.0
    pot = ModelPotential(ModelParams(2, 0.0))
    q, p, _ = _rejection_sample(pot, OMEGA, BAND, 128, generator(RngSeed(8)))
    ind = tangent_indicators(q, p, pot, T)
    lab = classify(ind.ftle, ind.megno, Thresholds(T), ind.escaped)
    reg, cha = np.mean(lab == REGULAR), np.mean(lab == CHAOTIC)
    harm = max(ftle(PhaseState(q0, p0), HarmonicPotential(2), T)
               for q0, p0 in (([1.0, 0.0], [0.0, 0.5]), ([0.2, -0.7], [0.4, 0.1])))
    dt = time.perf_counter() - t0
    report(record_property, 8, f"eta=0: {reg:.1%} Regular, {cha:.1%} Chaotic of 128; harmonic FTLE {harm:.2e} "
           f"(< 1e-2); {dt:.0f} s")
    assert reg >= 0.95 and cha == 0
    assert harm < 1e-2
    assert dt < 300


# 9 ---------------------------------------------------------------------------


def test_c9_ergodic_average(record_property):
    t0 = time.perf_counter()
    fld = sample_field(1, math.pi, 256, 0)
    avg = float(ergodic_average(fld, lambda f, y: f.value(y) ** 2, [80.0])[0])
    dt = time.perf_counter() - t0
    report(record_property, 9, f"mean of W^2 over B_80: {avg:.4f} (within 0.15 of 1); {dt:.1f} s")
    assert abs(avg - 1.0) < 0.15
    assert dt < 60


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
