"""Chaos indicators and homoclinic-crossing detection.

Two kinds of evidence are produced.

Tangent-flow indicators (batched over initial conditions): the finite-time
Lyapunov exponent and the time-averaged MEGNO ``<Y>``, both computed from a
single renormalised tangent vector propagated by the discrete tangent map.
Regular orbits give ``<Y> -> 2`` (linear tangent growth) and ``ftle ~ log t / t``;
chaotic ones give ``<Y> ~ lambda t / 2``.  An isochronous linear oscillator
has bounded tangent vectors and ``<Y> -> 0``.

Geometric evidence in a Poincare section: hyperbolic fixed points of the
return map, their stable and unstable manifolds grown from a fundamental
domain, and transverse intersections of the two curves.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import PhaseState, SectionSpec, _Stepper, _check_scheme, poincare_section, section_map
from .potential import hamiltonian

__all__ = [
    "Thresholds",
    "ChaosReport",
    "Indicators",
    "tangent_indicators",
    "ftle",
    "megno",
    "classify",
    "chaos_reports",
    "write_reports_json",
    "SectionChart",
    "PeriodicOrbit",
    "NoConvergence",
    "NonHyperbolic",
    "find_periodic_orbit",
    "ManifoldTrace",
    "trace_manifold",
    "Crossing",
    "detect_transverse_crossings",
    "write_crossings_csv",
    "away_from",
    "crossing_phase",
    "phase_near",
    "polyline_line_intersection",
    "splitting_gap",
    "REGULAR",
    "CHAOTIC",
    "UNDETERMINED",
]

REGULAR, CHAOTIC, UNDETERMINED = "Regular", "Chaotic", "Undetermined"


@dataclass(frozen=True)
class Thresholds:
    """Labelling thresholds for an integration horizon ``t_total``."""

    t_total: float
    chaos_factor: float = 10.0
    regular_factor: float = 3.0
    megno_window: float = 0.3
    megno_chaos: float = 4.0
    angle_min: float = 1e-3
    # lower edge of the regular MEGNO window; isochronous tori have MEGNO -> 0,
    # so None (the symmetric window 2 +/- megno_window) rejects genuine tori
    megno_floor: float | None = 0.0

    @property
    def lam_thresh(self):
        return self.chaos_factor * math.log(self.t_total) / self.t_total

    @property
    def lam_reg(self):
        return self.regular_factor * math.log(self.t_total) / self.t_total


@dataclass
class ChaosReport:
    initial_condition: list
    energy: float
    ftle: float
    megno: float
    label: str
    evidence: list | None = None

    def to_dict(self):
        return asdict(self)


@dataclass
class Indicators:
    ftle: np.ndarray
    megno: np.ndarray
    escaped: np.ndarray
    t_total: float
    q_samples: np.ndarray | None = None
    p_samples: np.ndarray | None = None
    sample_step: float = 0.0


def _default_tangent(B, d):
    v = 1.0 + np.arange(2 * d) / (2.0 * d)
    v[1::2] *= -1
    v /= np.linalg.norm(v)
    return np.broadcast_to(v, (B, 2 * d)).copy()


def tangent_indicators(q, p, potential, t_total, h=0.01, scheme="leapfrog", renorm_every=10,
                       energy_tol=1e-3, tangent=None, record_every=None) -> Indicators:
    """FTLE and mean MEGNO for a batch of initial conditions.

    The tangent vector is renormalised every ``renorm_every`` steps; the
    log-growth increments ``dl_k`` give ``ftle = sum dl_k / t`` and
    ``Y(t_n) = (2 / t_n) sum t_{k-1/2} dl_k`` whose running time average is
    the reported MEGNO.  Orbits whose energy error exceeds
    ``energy_tol * max(1, |H|)`` or that turn non-finite are flagged
    ``escaped``.  With ``record_every`` the base orbit is also sampled every
    that many steps (arrays of shape ``(n_samples, B, d)``).
    """
    weights = _check_scheme(scheme)
    q = np.atleast_2d(np.asarray(q, dtype=float)).copy()
    p = np.atleast_2d(np.asarray(p, dtype=float)).copy()
    B, d = q.shape
    n = int(round(t_total / h))
    if n < renorm_every:
        raise ValueError("t_total must cover at least one renormalisation interval")
    n = (n // renorm_every) * renorm_every
    v = _default_tangent(B, d) if tangent is None else np.array(tangent, dtype=float).reshape(B, 2 * d)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    dq, dp = v[:, :d, None].copy(), v[:, d:, None].copy()
    E0 = hamiltonian(potential, q, p)
    st = _Stepper(potential, q, tangent=True)
    sum_l = np.zeros(B)
    ysum = np.zeros(B)
    ybar = np.zeros(B)
    dt = renorm_every * h
    t_prev = 0.0
    bad = np.zeros(B, dtype=bool)
    Q = P = None
    if record_every:
        n_rec = n // record_every
        Q = np.empty((n_rec, B, d))
        P = np.empty((n_rec, B, d))
    r = 0
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        for k in range(1, n + 1):
            q, p, dq, dp = st.step(q, p, h, weights, dq, dp)
            if record_every and k % record_every == 0:
                Q[r], P[r] = q, p
                r += 1
            if k % renorm_every:
                continue
            t = k * h
            nrm = np.sqrt(np.sum(dq[..., 0] ** 2, axis=1) + np.sum(dp[..., 0] ** 2, axis=1))
            dl = np.log(nrm)
            fin = np.isfinite(dl)
            bad |= ~fin
            dl = np.where(fin, dl, 0.0)
            nrm = np.where(fin & (nrm > 0), nrm, 1.0)
            dq /= nrm[:, None, None]
            dp /= nrm[:, None, None]
            sum_l += dl
            ysum += 0.5 * (t + t_prev) * dl
            ybar += (2.0 / t) * ysum * dt
            t_prev = t
        T = n * h
        E1 = hamiltonian(potential, q, p)
    bad |= ~np.isfinite(E1) | (np.abs(E1 - E0) > energy_tol * np.maximum(1.0, np.abs(E0)))
    return Indicators(sum_l / T, ybar / T, bad, T, Q, P, (record_every or 0) * h)


def ftle(state: PhaseState, potential, t_total, renorm_every=10, h=0.01, scheme="leapfrog"):
    """Finite-time Lyapunov exponent of one orbit."""
    return float(tangent_indicators(state.q, state.p, potential, t_total, h, scheme, renorm_every).ftle[0])


def megno(state: PhaseState, potential, t_total, h=0.01, scheme="leapfrog", renorm_every=10):
    """Time-averaged MEGNO of one orbit."""
    return float(tangent_indicators(state.q, state.p, potential, t_total, h, scheme, renorm_every).megno[0])


def classify(ftle_values, megno_values, thresholds: Thresholds, escaped=None, crossing=None):
    """Vectorised labels from indicator values (conflicts become Undetermined)."""
    f = np.atleast_1d(np.asarray(ftle_values, dtype=float))
    m = np.atleast_1d(np.asarray(megno_values, dtype=float))
    cross = np.zeros(f.shape, dtype=bool) if crossing is None else np.broadcast_to(crossing, f.shape)
    esc = np.zeros(f.shape, dtype=bool) if escaped is None else np.asarray(escaped, dtype=bool)
    chaotic = (f > thresholds.lam_thresh) & ((m > thresholds.megno_chaos) | cross)
    w = thresholds.megno_window
    lo = 2 - w if thresholds.megno_floor is None else thresholds.megno_floor
    regular = (m >= lo) & (m <= 2 + w) & (f < thresholds.lam_reg)
    labels = np.full(f.shape, UNDETERMINED, dtype=object)
    labels[chaotic & ~regular] = CHAOTIC
    labels[regular & ~chaotic] = REGULAR
    labels[esc | ~np.isfinite(f) | ~np.isfinite(m)] = UNDETERMINED
    return labels


def chaos_reports(q, p, potential, t_total, h=0.01, scheme="leapfrog", renorm_every=10, thresholds=None):
    """Indicator reports for a batch of initial conditions."""
    q = np.atleast_2d(q)
    p = np.atleast_2d(p)
    ind = tangent_indicators(q, p, potential, t_total, h, scheme, renorm_every)
    th = thresholds or Thresholds(ind.t_total)
    labels = classify(ind.ftle, ind.megno, th, ind.escaped)
    E = hamiltonian(potential, q, p)
    return [ChaosReport(np.concatenate([q[i], p[i]]).tolist(), float(E[i]), float(ind.ftle[i]),
                        float(ind.megno[i]), str(labels[i])) for i in range(q.shape[0])]


def write_reports_json(path, reports):
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1)


# ---------------------------------------------------------------------------
# Section chart and periodic orbits
# ---------------------------------------------------------------------------


class SectionChart:
    """Energy-level section ``q_i = c`` with ``p_i`` of sign ``direction``.

    Chart coordinates are the remaining positions followed by the remaining
    momenta; ``p_i`` is recovered from the energy.  The return map and its
    Jacobian are computed with :func:`hamiltonia.dynamics.section_map`.
    """

    def __init__(self, potential, energy, index=0, value=0.0, direction=1, h=1e-3,
                 scheme="order4", t_max=50.0):
        self.pot = potential
        self.energy = float(energy)
        self.d = potential.dim
        self.i = int(index)
        self.c = float(value)
        self.direction = 1 if direction > 0 else -1
        self.h = h
        self.scheme = scheme
        self.t_max = t_max
        self.others = [j for j in range(self.d) if j != self.i]
        self.section = SectionSpec.coordinate(self.i, self.c, self.direction, dim=self.d)

    @property
    def chart_dim(self):
        return 2 * (self.d - 1)

    def lift(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        B = z.shape[0]
        m = self.d - 1
        q = np.empty((B, self.d))
        p = np.empty((B, self.d))
        q[:, self.i] = self.c
        q[:, self.others] = z[:, :m]
        p[:, self.others] = z[:, m:]
        K = 2.0 * (self.energy - self.pot.value(q)) - np.sum(z[:, m:] ** 2, axis=1)
        with np.errstate(invalid="ignore"):
            p[:, self.i] = self.direction * np.sqrt(K)
        return q, p, K > 0

    def lift_jacobian(self, q, p):
        """``d(q, p) / dz`` of shape ``(B, 2d, 2d-2)``."""
        B = q.shape[0]
        m = self.d - 1
        J = np.zeros((B, 2 * self.d, 2 * m))
        g = self.pot.gradient(q)
        pi = p[:, self.i]
        for a, j in enumerate(self.others):
            J[:, j, a] = 1.0
            J[:, self.d + j, m + a] = 1.0
            J[:, self.d + self.i, a] = -g[:, j] / pi
            J[:, self.d + self.i, m + a] = -p[:, j] / pi
        return J

    def project(self, q, p):
        return np.concatenate([q[:, self.others], p[:, self.others]], axis=1)

    def _flow_once(self, z, backward=False, jacobian=False):
        q, p, ok = self.lift(z)
        h = -self.h if backward else self.h
        if jacobian:
            T0 = self.lift_jacobian(q, p)
            qc, pc, tc, ok2, tan = section_map(q, p, self.pot, self.section, h, self.scheme, self.t_max, tangent=T0)
            rows = self.others + [self.d + j for j in self.others]
            return self.project(qc, pc), tc, ok & ok2, tan[:, rows, :]
        qc, pc, tc, ok2 = section_map(q, p, self.pot, self.section, h, self.scheme, self.t_max)
        return self.project(qc, pc), tc, ok & ok2

    def map(self, z, n=1, backward=False, jacobian=False):
        """``n``-fold return map; returns ``(z_n, total_time, ok[, J])``."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        t = np.zeros(z.shape[0])
        ok = np.ones(z.shape[0], dtype=bool)
        J = np.broadcast_to(np.eye(self.chart_dim), (z.shape[0],) + (self.chart_dim,) * 2).copy() if jacobian else None
        for _ in range(n):
            if jacobian:
                z, dt, good, Jk = self._flow_once(z, backward, True)
                J = Jk @ J
            else:
                z, dt, good = self._flow_once(z, backward)
            t += np.abs(dt)
            ok &= good
            z = np.where(ok[:, None], z, np.nan)
        if jacobian:
            return z, t, ok, J
        return z, t, ok


class NoConvergence(RuntimeError):
    pass


class NonHyperbolic(RuntimeError):
    pass


@dataclass
class PeriodicOrbit:
    z: np.ndarray
    period: float
    multipliers: np.ndarray
    monodromy: np.ndarray
    unstable: np.ndarray
    stable: np.ndarray
    residual: float
    chart: SectionChart = field(repr=False, default=None)

    @property
    def reciprocity_defect(self):
        """``|mu_u * mu_s - 1|`` for the outermost pair."""
        mu = np.sort(np.abs(self.multipliers))
        return float(abs(mu[-1] * mu[0] - 1.0))


def find_periodic_orbit(guess, chart: SectionChart, period_hint=None, tol=1e-10, maxiter=40, fd_step=1e-7,
                        hyperbolic_tol=1e-6) -> PeriodicOrbit:
    """Fixed point of the section return map by Newton with a finite-difference Jacobian.

    The monodromy reported at the solution is the variational Jacobian
    of the return map restricted to the energy level.
    """
    if period_hint is not None:
        chart.t_max = 1.5 * period_hint
    z = np.asarray(guess, dtype=float).ravel()
    n = z.size
    if n != chart.chart_dim:
        raise ValueError("guess has the wrong dimension for this chart")
    res = np.inf
    for _ in range(maxiter):
        pts = np.vstack([z] + [z + s * fd_step * e for e in np.eye(n) for s in (1, -1)])
        img, _, ok = chart.map(pts)
        if not np.all(ok):
            raise NoConvergence("return map undefined near the current iterate")
        G = img[0] - z
        res = float(np.max(np.abs(G)))
        if res < tol:
            break
        D = np.column_stack([(img[1 + 2 * a] - img[2 + 2 * a]) / (2 * fd_step) for a in range(n)])
        try:
            dz = np.linalg.solve(D - np.eye(n), -G)
        except np.linalg.LinAlgError:
            raise NonHyperbolic("return-map Jacobian has a unit multiplier") from None
        if not np.all(np.isfinite(dz)):
            raise NoConvergence("Newton step diverged")
        # backtrack until the map is defined and the residual does not blow up
        for _ in range(30):
            trial, _, okt = chart.map(z + dz)
            if okt[0] and np.max(np.abs(trial[0] - z - dz)) < 2.0 * res:
                break
            dz = 0.5 * dz
        else:
            raise NoConvergence("no acceptable Newton step")
        z = z + dz
    else:
        raise NoConvergence(f"residual {res:.3e} after {maxiter} iterations")
    img, t, ok, J = chart.map(z, jacobian=True)
    J = J[0]
    mu, vec = np.linalg.eig(J)
    if np.all(np.abs(np.abs(mu) - 1.0) < hyperbolic_tol) or np.any(np.abs(mu.imag) > 1e-9 * np.abs(mu)):
        raise NonHyperbolic(f"multipliers {mu} are not real hyperbolic")
    order = np.argsort(np.abs(mu))
    mu, vec = mu[order].real, vec[:, order].real
    if abs(mu[-1]) <= 1 + hyperbolic_tol:
        raise NonHyperbolic(f"multipliers {mu} have no expanding direction")
    return PeriodicOrbit(z, float(t[0]), mu, J, _orient(vec[:, -1]), _orient(vec[:, 0]), res, chart)


def _orient(v):
    """Unit vector whose first momentum component is positive."""
    v = v / np.linalg.norm(v)
    k = v.size // 2
    if abs(v[k]) < 1e-12:
        k = int(np.argmax(np.abs(v)))
    return v if v[k] > 0 else -v


# ---------------------------------------------------------------------------
# Manifolds
# ---------------------------------------------------------------------------


@dataclass
class ManifoldTrace:
    points: np.ndarray
    arclength: np.ndarray
    branch: int
    direction: str
    truncated: bool
    orbit: PeriodicOrbit = field(repr=False, default=None)
    seeds: np.ndarray = field(repr=False, default=None)

    @property
    def max_spacing(self):
        return float(np.max(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


def trace_manifold(orbit: PeriodicOrbit, branch=1, direction="unstable", arclen_max=10.0, delta0=1e-6,
                   max_spacing=1e-2, n_seed=32, max_points=20000, max_iter=12) -> ManifoldTrace:
    """Grow one branch of a one-dimensional invariant manifold in the section.

    Seeds ``z* + branch delta0 mu^u v`` with ``u`` in ``[0, 1)`` cover a
    fundamental domain; the ``k``-th image of the domain is appended after
    the ``(k-1)``-th.  Whenever two consecutive images are more than
    ``max_spacing`` apart a seed is inserted at the midpoint parameter and
    mapped the same number of times.  The stable manifold uses the inverse
    map (integration backwards in time).
    """
    if direction not in ("stable", "unstable"):
        raise ValueError("direction must be 'stable' or 'unstable'")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    chart = orbit.chart
    backward = direction == "stable"
    mu = orbit.multipliers[0] if backward else orbit.multipliers[-1]
    v = orbit.stable if backward else orbit.unstable
    power = 2 if mu < 0 else 1
    lam = abs(mu) ** (-power if backward else power)
    z0 = orbit.z

    def seeds(u):
        return z0 + branch * delta0 * (lam ** u)[:, None] * v

    def images(u, k):
        z = seeds(u)
        if k == 0:
            return z, np.ones(len(u), dtype=bool)
        z, _, ok = chart.map(z, n=k * power, backward=backward)
        return z, ok

    u = np.linspace(0.0, 1.0, n_seed + 1)
    pts = [seeds(u)]
    params = [u]
    arcl = float(np.sum(np.linalg.norm(np.diff(pts[0], axis=0), axis=1)))
    truncated = False
    total = len(u)
    for k in range(1, max_iter + 1):
        uk = params[-1]
        zk, ok = images(uk, k)
        for _ in range(40):
            gap = np.linalg.norm(np.diff(zk, axis=0), axis=1)
            need = ~(gap <= max_spacing)
            if not np.any(need):
                break
            if total + need.sum() > max_points:
                truncated = True
                break
            # several equally spaced parameters per gap, sized by the current gap
            gaps = np.where(np.isfinite(gap[need]), gap[need], 2 * max_spacing)
            m = np.clip(np.ceil(1.3 * gaps / max_spacing).astype(int) - 1, 1, 64)
            lo, hi = uk[:-1][need], uk[1:][need]
            umid = np.concatenate([lo[i] + (hi[i] - lo[i]) * np.arange(1, m[i] + 1) / (m[i] + 1)
                                   for i in range(len(m))])
            if total + umid.size > max_points:
                truncated = True
                break
            zm, okm = images(umid, k)
            uk = np.concatenate([uk, umid])
            zk = np.concatenate([zk, zm])
            ok = np.concatenate([ok, okm])
            order = np.argsort(uk)
            uk, zk, ok = uk[order], zk[order], ok[order]
            total += len(umid)
        if not np.all(ok):
            first_bad = np.argmin(ok)
            uk, zk = uk[:first_bad], zk[:first_bad]
            truncated = True
        seg = np.linalg.norm(np.diff(np.vstack([pts[-1][-1:], zk]), axis=0), axis=1)
        cum = arcl + np.cumsum(seg)
        if cum.size and cum[-1] >= arclen_max:
            stop = int(np.searchsorted(cum, arclen_max)) + 1
            pts.append(zk[:stop])
            params.append(uk[:stop])
            arcl = float(cum[stop - 1])
            break
        pts.append(zk)
        params.append(uk)
        arcl = float(cum[-1]) if cum.size else arcl
        if truncated:
            break
    else:
        truncated = True
    P = np.vstack(pts)
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])
    return ManifoldTrace(P, s, branch, direction, truncated or np.any(np.diff(s) > max_spacing), orbit,
                         np.concatenate(params))


# ---------------------------------------------------------------------------
# Transverse crossings
# ---------------------------------------------------------------------------


@dataclass
class Crossing:
    point: np.ndarray
    angle: float
    index_u: int
    index_s: int


def _tangents(P):
    """Second-order (non-uniform central difference) unit tangents at polyline vertices."""
    n = len(P)
    T = np.empty_like(P)
    if n < 3:
        T[:] = P[-1] - P[0]
    else:
        a = np.linalg.norm(P[1:-1] - P[:-2], axis=1)[:, None]
        b = np.linalg.norm(P[2:] - P[1:-1], axis=1)[:, None]
        T[1:-1] = (-(b / (a * (a + b))) * P[:-2] + ((b - a) / (a * b)) * P[1:-1] + (a / (b * (a + b))) * P[2:])
        T[0] = P[1] - P[0]
        T[-1] = P[-1] - P[-2]
    return T / np.linalg.norm(T, axis=1, keepdims=True)


def detect_transverse_crossings(trace_u, trace_s, angle_min=1e-3, chunk=512):
    """Segment-pair intersection sweep between two planar polylines.

    Accepts :class:`ManifoldTrace` objects or ``(n, 2)`` arrays.  The angle
    at each intersection comes from second-order vertex tangents
    interpolated along the two segments, so chord discretisation does not
    masquerade as transversality.  Only crossings with angle above
    ``angle_min`` are returned.
    """
    A = np.asarray(getattr(trace_u, "points", trace_u), dtype=float)
    Bp = np.asarray(getattr(trace_s, "points", trace_s), dtype=float)
    if A.shape[1] != 2 or Bp.shape[1] != 2:
        raise ValueError("crossing detection needs planar section charts")
    Ta, Tb = _tangents(A), _tangents(Bp)
    a0, da = A[:-1], A[1:] - A[:-1]
    b0, db = Bp[:-1], Bp[1:] - Bp[:-1]
    blo, bhi = np.minimum(Bp[:-1], Bp[1:]), np.maximum(Bp[:-1], Bp[1:])
    out = []
    for s0 in range(0, len(a0), chunk):
        sl = slice(s0, s0 + chunk)
        alo = np.minimum(A[:-1][sl], A[1:][sl])
        ahi = np.maximum(A[:-1][sl], A[1:][sl])
        box = ((alo[:, None, 0] <= bhi[None, :, 0]) & (blo[None, :, 0] <= ahi[:, None, 0])
               & (alo[:, None, 1] <= bhi[None, :, 1]) & (blo[None, :, 1] <= ahi[:, None, 1]))
        ii, jj = np.nonzero(box)
        if ii.size == 0:
            continue
        ii = ii + s0
        r, s = da[ii], db[jj]
        w = b0[jj] - a0[ii]
        den = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            tu = (w[:, 0] * s[:, 1] - w[:, 1] * s[:, 0]) / den
            ts = (w[:, 0] * r[:, 1] - w[:, 1] * r[:, 0]) / den
        hit = (den != 0) & (tu >= 0) & (tu < 1) & (ts >= 0) & (ts < 1)
        for i, j, x, y in zip(ii[hit], jj[hit], tu[hit], ts[hit]):
            ta = (1 - x) * Ta[i] + x * Ta[i + 1]
            tb = (1 - y) * Tb[j] + y * Tb[j + 1]
            c = abs(ta @ tb) / (np.linalg.norm(ta) * np.linalg.norm(tb))
            ang = float(np.arccos(min(1.0, c)))
            if ang > angle_min:
                out.append(Crossing(a0[i] + x * da[i], ang, int(i), int(j)))
    out.sort(key=lambda c: c.index_u)
    return out


def write_crossings_csv(path, crossings, labels=("z_1", "z_2")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(labels) + ["angle", "index_u", "index_s"])
        for c in crossings:
            w.writerow([repr(float(v)) for v in c.point] + [repr(c.angle), c.index_u, c.index_s])


def away_from(crossings, centers, radius):
    """Drop crossings within ``radius`` of any of ``centers`` (e.g. the fixed points themselves)."""
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    return [c for c in crossings if np.min(np.linalg.norm(C - c.point, axis=1)) > radius]


def crossing_phase(point, chart: SectionChart, index=1, value=0.0, h=1e-3, t_max=20.0):
    """Signed flight time from a section point to the nearest passage ``q_index = value``.

    For a rotor with unit frequency this is the phase offset between the
    rotor (fixed by the section) and the separatrix time shift of the
    degree of freedom ``index``.  Returned in ``(-pi, pi]``.
    """
    q, p, ok = chart.lift(point)
    if not ok[0]:
        raise ValueError("point is not on the energy level of the chart")
    st = PhaseState(q[0], p[0])
    sec = SectionSpec.coordinate(index, value, 0, dim=chart.d)
    ts = []
    for hh in (h, -h):
        r = poincare_section(st, chart.pot, sec, 1, hh, chart.scheme, t_max)
        if len(r.t):
            ts.append(float(r.t[0]))
    if not ts:
        raise ValueError("orbit never reaches the reference surface")
    t = min(ts, key=abs)
    return float(math.remainder(-t, 2 * math.pi))


def phase_near(phase, targets=(0.0, math.pi), tol=math.pi / 4):
    """True when ``phase`` lies within ``tol`` of one of ``targets`` modulo ``2 pi``."""
    return any(abs(math.remainder(phase - a, 2 * math.pi)) < tol for a in targets)


def polyline_line_intersection(P, origin, direction):
    """Parameters ``s`` where polyline ``P`` meets the line ``origin + s * direction``."""
    P = np.asarray(getattr(P, "points", P), dtype=float)
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    nrm = np.array([-u[1], u[0]])
    side = (P - origin) @ nrm
    idx = np.flatnonzero(np.sign(side[:-1]) * np.sign(side[1:]) <= 0)
    out = []
    for i in idx:
        a, b = side[i], side[i + 1]
        if a == b:
            continue
        x = P[i] + (a / (a - b)) * (P[i + 1] - P[i])
        out.append(float((x - origin) @ u))
    return np.array(sorted(out))


def splitting_gap(trace_u, trace_s, origin, normal):
    """Distance between the two traces along the line through ``origin`` in direction ``normal``.

    Uses the intersection of each trace closest to ``origin``; NaN when one
    trace misses the line.
    """
    su = polyline_line_intersection(trace_u, origin, normal)
    ss = polyline_line_intersection(trace_s, origin, normal)
    if su.size == 0 or ss.size == 0:
        return float("nan")
    return float(abs(su[np.argmin(np.abs(su))] - ss[np.argmin(np.abs(ss))]))
