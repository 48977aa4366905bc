import json
import math

import numpy as np
import pytest

from hamiltonia.chaos import (
    CHAOTIC,
    REGULAR,
    UNDETERMINED,
    NonHyperbolic,
    SectionChart,
    Thresholds,
    chaos_reports,
    classify,
    detect_transverse_crossings,
    find_periodic_orbit,
    ftle,
    megno,
    phase_near,
    polyline_line_intersection,
    splitting_gap,
    tangent_indicators,
    write_crossings_csv,
    write_reports_json,
)
from hamiltonia.dynamics import PhaseState
from hamiltonia.model import ModelParams, ModelPotential, lyapunov_orbit_guess, separatrix_normal
from hamiltonia.potential import HarmonicPotential, ZeroPotential
from hamiltonia.rng import RngSeed, generator
from hamiltonia.tori import Region, _rejection_sample

ETA0 = ModelPotential(ModelParams(2, 0.0))
ETA5 = ModelPotential(ModelParams(2, 0.05))
OMEGA = Region([-5, -5], [5, 5], 5.0, lambda q, p: np.sum(q * q, -1) + np.sum(p * p, -1) < 25)


def chaotic_point():
    q, p, ok = SectionChart(ETA5, 2.5).lift([math.pi, 0.05])
    assert ok[0]
    return PhaseState(q[0], p[0])


# --- indicators -------------------------------------------------------------


def test_harmonic_indicators():
    st = PhaseState([1.0, 0.0], [0.0, 0.5])
    assert ftle(st, HarmonicPotential(2), 1000.0) < 1e-2
    # bounded tangent vectors: MEGNO tends to 0, not 2, for an isochronous oscillator
    assert abs(megno(st, HarmonicPotential(2), 1000.0)) < 0.1


def test_free_motion_megno_from_below():
    vals = [megno(PhaseState([0.0, 0.0], [1.0, 0.3]), ZeroPotential(2), T) for T in (10.0, 100.0, 1000.0)]
    assert vals[0] < vals[1] < vals[2] < 2.0
    assert vals[2] > 1.9


def test_integrable_envelope():
    T = 1000.0
    ind = tangent_indicators([[0.5, 1.0], [-0.3, 0.4]], [[0.3, 0.5], [1.0, -0.2]], ETA0, T)
    assert np.all(ind.ftle < 2 * math.log(T) / T)
    assert np.all(classify(ind.ftle, ind.megno, Thresholds(T)) == REGULAR)


def test_chaotic_orbit():
    st = chaotic_point()
    ind = tangent_indicators(st.q, st.p, ETA5, 1000.0)
    assert ind.ftle[0] > 0.05
    assert ind.megno[0] > 4.0
    assert classify(ind.ftle, ind.megno, Thresholds(1000.0))[0] == CHAOTIC


def test_reports(tmp_path):
    reps = chaos_reports([[0.5, 1.0]], [[0.3, 0.5]], ETA0, 200.0)
    assert reps[0].label == REGULAR
    assert reps[0].energy == pytest.approx(float(ETA0.value(np.array([0.5, 1.0]))) + 0.5 * 0.34)
    write_reports_json(tmp_path / "r.json", reps)
    assert json.loads((tmp_path / "r.json").read_text())[0]["label"] == REGULAR


def test_classify_rules():
    th = Thresholds(1000.0)
    f = np.array([0.1, 0.1, 0.001, 0.001, 0.1, np.nan])
    m = np.array([10.0, 1.0, 2.0, 5.0, 1.0, 2.0])
    cross = np.array([False, False, False, False, True, False])
    lab = classify(f, m, th, crossing=cross)
    assert list(lab) == [CHAOTIC, UNDETERMINED, REGULAR, UNDETERMINED, CHAOTIC, UNDETERMINED]
    assert classify([0.001], [2.0], th, escaped=[True])[0] == UNDETERMINED
    # the symmetric window is available and rejects an isochronous MEGNO near 0
    assert classify([0.001], [0.1], Thresholds(1000.0, megno_floor=None))[0] == UNDETERMINED


def test_escape_flag():
    ind = tangent_indicators([[0.0]], [[1.0]], HarmonicPotential(1), 10.0, h=0.01, energy_tol=1e-12)
    assert ind.escaped[0]


def test_indicator_consistency():
    # pre-registered sample: 50 band orbits of the eta = 0.05 model in the disc |x|^2 + |P|^2 < 25
    T = 1000.0
    th = Thresholds(T)
    q, p, _ = _rejection_sample(ETA5, OMEGA, (2.2, 2.8), 50, generator(RngSeed(0)))
    ind = tangent_indicators(q, p, ETA5, T)
    by_ftle = ind.ftle > th.lam_thresh
    by_megno = ind.megno > th.megno_chaos
    assert np.mean(by_ftle == by_megno) >= 0.9
    lab = classify(ind.ftle, ind.megno, th, ind.escaped)
    assert np.all(lab[by_ftle != by_megno] == UNDETERMINED)


# --- periodic orbits --------------------------------------------------------


def test_unperturbed_periodic_orbit():
    params = ModelParams(2, 0.0)
    orb = find_periodic_orbit(lyapunov_orbit_guess(params, 2.5, 1), SectionChart(ETA0, 2.5), period_hint=2 * math.pi)
    assert orb.residual < 1e-10
    assert np.allclose(orb.z, [math.pi, 0.0], atol=1e-10)
    assert orb.period == pytest.approx(2 * math.pi, abs=1e-9)
    mu = np.sort(np.abs(orb.multipliers))
    assert mu[-1] == pytest.approx(math.exp(2 * math.pi), rel=1e-6)
    assert mu[0] == pytest.approx(math.exp(-2 * math.pi), rel=1e-6)
    assert orb.reciprocity_defect < 1e-6


def test_perturbed_orbit_persists():
    params = ModelParams(2, 0.05)
    orb = find_periodic_orbit(lyapunov_orbit_guess(params, 2.5, 1), SectionChart(ETA5, 2.5), period_hint=2 * math.pi)
    assert orb.residual < 1e-10
    assert orb.reciprocity_defect < 1e-6
    # O(eta) displacement from (pi, 0): 0.16 at eta = 0.05
    assert np.linalg.norm(orb.z - [math.pi, 0.0]) < 5 * 0.05


def test_harmonic_nonhyperbolic():
    with pytest.raises(NonHyperbolic):
        find_periodic_orbit([0.3, 0.0], SectionChart(HarmonicPotential(2), 1.0), period_hint=2 * math.pi)


# --- crossings --------------------------------------------------------------


def test_synthetic_right_angle():
    a = np.column_stack([np.linspace(-1, 1, 11), np.zeros(11)])
    b = np.column_stack([np.full(7, 0.05), np.linspace(-1, 1, 7)])
    cr = detect_transverse_crossings(a, b)
    assert len(cr) == 1
    assert cr[0].angle == pytest.approx(math.pi / 2, abs=1e-12)
    assert np.allclose(cr[0].point, [0.05, 0.0])


def test_tangent_polylines_not_transverse():
    x = np.linspace(-1, 1, 401)
    a = np.column_stack([x, x**2])
    b = np.column_stack([x, -(x**2)])
    assert detect_transverse_crossings(a, b) == []


def test_line_intersection_helpers():
    P = np.array([[0.0, -1.0], [0.0, 1.0]])
    s = polyline_line_intersection(P, np.array([-2.0, 0.0]), np.array([1.0, 0.0]))
    assert s == pytest.approx([2.0])
    Q = P + [0.5, 0.0]
    assert splitting_gap(P, Q, np.array([-2.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(0.5)


def test_phase_near():
    assert phase_near(0.1) and phase_near(-3.0) and not phase_near(1.5)


def test_unperturbed_traces(tangle):
    t = tangle(0.0)
    assert t.crossings == []
    for tr in (t.unstable, t.stable):
        x, P = tr.points[:, 0], tr.points[:, 1]
        # the upper separatrix branch in (x_2, P_2): P = 2 cos(x / 2)
        assert np.max(np.abs(P - 2 * np.cos(x / 2))) < 1e-4
        assert tr.max_spacing <= 1e-2 + 1e-12
    # where both traces exist they coincide: compare P_2 at equal x_2 along the overlap
    xs, Ps = t.stable.points[:, 0], t.stable.points[:, 1]
    order = np.argsort(xs)
    xu, Pu = t.unstable.points[:, 0], t.unstable.points[:, 1]
    both = (xu > xs.min()) & (xu < xs.max())
    assert both.sum() > 100
    assert np.max(np.abs(Pu[both] - np.interp(xu[both], xs[order], Ps[order]))) < 1e-4
    origin, normal = separatrix_normal(math.pi / 2)
    assert splitting_gap(t.unstable, t.stable, origin, normal) < 1e-4


def test_trace_leaves_along_eigendirection(tangle):
    t = tangle(0.05)
    for tr, v in ((t.unstable, t.orbits[-1].unstable), (t.stable, t.orbits[1].stable)):
        seg = tr.points[1] - tr.points[0]
        c = abs(seg @ v) / np.linalg.norm(seg)
        assert math.acos(min(1.0, c)) < 1e-3


def test_perturbed_tangle(tangle, tmp_path):
    t = tangle(0.05)
    assert len(t.crossings) >= 2
    assert all(c.angle > 1e-3 for c in t.crossings)
    assert all(phase_near(ph) for ph in t.phases)
    # both critical-point families of the Melnikov potential are represented
    assert any(abs(ph) < math.pi / 4 for ph in t.phases)
    assert any(abs(abs(ph) - math.pi) < math.pi / 4 for ph in t.phases)
    write_crossings_csv(tmp_path / "c.csv", t.crossings)
    assert len((tmp_path / "c.csv").read_text().splitlines()) == len(t.crossings) + 1


def test_splitting_grows_with_eta(tangle):
    origin, normal = separatrix_normal(math.pi / 2)
    gaps = [splitting_gap(tangle(eta).unstable, tangle(eta).stable, origin, normal) for eta in (0.01, 0.02, 0.05)]
    assert np.all(np.isfinite(gaps))
    assert gaps[0] < gaps[1] < gaps[2]
