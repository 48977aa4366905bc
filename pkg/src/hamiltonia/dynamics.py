"""Explicit symplectic integration of ``H = |p|^2 / 2 + V(q)``.

All routines are vectorised over a leading batch axis: ``q`` and ``p`` may
have shape ``(d,)`` or ``(B, d)``.  Two schemes are provided:

``"leapfrog"``
    kick-drift-kick Stormer-Verlet, order 2.
``"order4"``
    Yoshida's triple-jump composition of three leapfrog steps, order 4.

Tangent vectors are propagated with the exact derivative of the discrete
map (the linearised kick-drift-kick), so the propagated matrix is the
Jacobian of the numerical flow and is symplectic to rounding error.
Positions are never reduced modulo ``2 pi`` here; callers wrap at output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .potential import hamiltonian

__all__ = [
    "PhaseState",
    "Trajectory",
    "TangentBundleState",
    "SectionSpec",
    "SectionResult",
    "IntegrationError",
    "step",
    "integrate",
    "integrate_tangent",
    "poincare_section",
    "symplectic_defect",
    "canonical_form",
    "write_trajectory_csv",
    "write_section_csv",
]

_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
_WEIGHTS = {"leapfrog": (1.0,), "order4": (_W1, _W0, _W1)}


class IntegrationError(RuntimeError):
    """The state became non-finite."""


@dataclass
class PhaseState:
    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float)
        self.p = np.array(self.p, dtype=float)
        if self.q.shape != self.p.shape:
            raise ValueError("q and p must have the same shape")

    @property
    def dim(self):
        return self.q.shape[-1]

    def energy(self, potential):
        return hamiltonian(potential, self.q, self.p)

    def wrapped(self):
        """Copy with positions reduced to ``[0, 2 pi)``."""
        return PhaseState(np.mod(self.q, 2 * np.pi), self.p.copy(), self.t)


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    step: float

    @property
    def states(self):
        return [PhaseState(self.q[i], self.p[i], float(self.t[i])) for i in range(len(self.t))]

    @property
    def energy_drift(self):
        return np.max(np.abs(self.energy - self.energy[0]), axis=0)


@dataclass
class TangentBundleState:
    """Base point plus tangent matrix ``M`` of shape ``(..., 2d, m)``; rows ordered (dq, dp)."""

    base: PhaseState
    M: np.ndarray

    @classmethod
    def identity(cls, base):
        d = base.dim
        lead = base.q.shape[:-1]
        M = np.broadcast_to(np.eye(2 * d), lead + (2 * d, 2 * d)).copy()
        return cls(base, M)


def _check_scheme(scheme):
    try:
        return _WEIGHTS[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}; use 'leapfrog' or 'order4'") from None


class _Stepper:
    """Carries the cached force (and Hessian) between steps."""

    def __init__(self, potential, q, tangent=False):
        self.pot = potential
        self.tangent = tangent
        if tangent:
            self.g, self.H = potential.gradient_hessian(q)
        else:
            self.g, self.H = potential.gradient(q), None

    def leapfrog(self, q, p, h, dq=None, dp=None):
        # per-member step sizes arrive as shape (B,)
        ht = h
        if np.ndim(h):
            h = np.asarray(h)[..., None]
            ht = h[..., None]
        p = p - 0.5 * h * self.g
        if dq is not None:
            dp = dp - 0.5 * ht * (self.H @ dq)
        q = q + h * p
        if dq is not None:
            dq = dq + ht * dp
        if self.tangent:
            self.g, self.H = self.pot.gradient_hessian(q)
        else:
            self.g = self.pot.gradient(q)
        p = p - 0.5 * h * self.g
        if dq is not None:
            dp = dp - 0.5 * ht * (self.H @ dq)
        return q, p, dq, dp

    def step(self, q, p, h, weights, dq=None, dp=None):
        for w in weights:
            q, p, dq, dp = self.leapfrog(q, p, w * np.asarray(h) if np.ndim(h) else w * h, dq, dp)
        return q, p, dq, dp


def _finite_or_raise(q, p, t):
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise IntegrationError(f"non-finite state at t={t:.6g}")


def step(state: PhaseState, h, potential, scheme="leapfrog") -> PhaseState:
    """Advance one step of size ``h`` (negative ``h`` integrates backwards)."""
    weights = _check_scheme(scheme)
    st = _Stepper(potential, state.q)
    q, p, _, _ = st.step(state.q, state.p, h, weights)
    _finite_or_raise(q, p, state.t + h)
    return PhaseState(q, p, state.t + h)


def integrate(state: PhaseState, t_end, h, potential, scheme="leapfrog", record_every=1) -> Trajectory:
    """Integrate to ``t_end`` with ``round((t_end - t) / h)`` fixed steps.

    Samples are stored every ``record_every`` steps (plus the initial state).
    """
    if t_end <= state.t:
        raise ValueError("t_end must exceed the initial time")
    if h <= 0:
        raise ValueError("step size must be positive")
    weights = _check_scheme(scheme)
    n = int(round((t_end - state.t) / h))
    n_rec = n // record_every + 1
    q, p = state.q.copy(), state.p.copy()
    Q = np.empty((n_rec,) + q.shape)
    P = np.empty((n_rec,) + p.shape)
    T = state.t + h * record_every * np.arange(n_rec)
    Q[0], P[0] = q, p
    st = _Stepper(potential, q)
    r = 1
    for k in range(1, n + 1):
        q, p, _, _ = st.step(q, p, h, weights)
        if k % record_every == 0:
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                raise IntegrationError(f"non-finite state at t={state.t + k * h:.6g}")
            Q[r], P[r] = q, p
            r += 1
    _finite_or_raise(q, p, state.t + n * h)
    E = hamiltonian(potential, Q, P)
    return Trajectory(T, Q, P, E, h)


def integrate_tangent(tb: TangentBundleState, t_end, h, potential, scheme="leapfrog") -> TangentBundleState:
    """Propagate base point and tangent matrix with the discrete tangent map."""
    weights = _check_scheme(scheme)
    base = tb.base
    n = int(round((t_end - base.t) / h))
    if n < 0:
        raise ValueError("t_end before initial time")
    d = base.dim
    q, p = base.q.copy(), base.p.copy()
    dq, dp = tb.M[..., :d, :].copy(), tb.M[..., d:, :].copy()
    st = _Stepper(potential, q, tangent=True)
    for _ in range(n):
        q, p, dq, dp = st.step(q, p, h, weights, dq, dp)
    _finite_or_raise(q, p, base.t + n * h)
    if not np.all(np.isfinite(dq)):
        raise IntegrationError("tangent matrix overflow; renormalise more often")
    return TangentBundleState(PhaseState(q, p, base.t + n * h), np.concatenate([dq, dp], axis=-2))


def canonical_form(d):
    """``Omega = [[0, I], [-I, 0]]`` in (q, p) ordering."""
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, I], [-I, Z]])


def symplectic_defect(M):
    """``max |M^T Omega M - Omega|`` for square tangent matrices."""
    n = M.shape[-1]
    Om = canonical_form(n // 2)
    return float(np.max(np.abs(np.swapaxes(M, -1, -2) @ Om @ M - Om)))


# ---------------------------------------------------------------------------
# Poincare sections
# ---------------------------------------------------------------------------


@dataclass
class SectionSpec:
    """Affine section ``s(q, p) = a . (q, p) - c = 0``.

    ``direction`` +1 keeps crossings with ``ds/dt > 0``, -1 those with
    ``ds/dt < 0`` and 0 keeps both.
    """

    a: np.ndarray
    c: float = 0.0
    direction: int = 1
    tol: float = 1e-13
    index: int | None = field(default=None, repr=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)

    @classmethod
    def coordinate(cls, i, value=0.0, direction=1, dim=None, momentum=False, tol=1e-13):
        """Section ``q_i = value`` (or ``p_i = value`` with ``momentum=True``)."""
        if dim is None:
            raise ValueError("dim is required")
        a = np.zeros(2 * dim)
        a[i + (dim if momentum else 0)] = 1.0
        return cls(a, float(value), direction, tol, None if momentum else i)

    def s(self, q, p):
        if self.index is not None:
            return q[..., self.index] - self.c
        d = q.shape[-1]
        return q @ self.a[:d] + p @ self.a[d:] - self.c

    def sdot(self, q, p, grad):
        d = q.shape[-1]
        return p @ self.a[:d] - grad @ self.a[d:]


@dataclass
class SectionResult:
    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    truncated: bool

    @property
    def points(self):
        return np.concatenate([self.q, self.p], axis=-1)


def _polish_crossing(q0, p0, h_sign, potential, section, weights, t_guess, h_max):
    """Newton on the partial step length so the scheme's image lies on the section."""
    tau = np.clip(t_guess, 0.0, h_max)
    for _ in range(30):
        st = _Stepper(potential, q0)
        q, p, _, _ = st.step(q0, p0, h_sign * tau, weights)
        s = section.s(q, p)
        sd = h_sign * section.sdot(q, p, st.g)
        if np.all(np.abs(s) < section.tol):
            break
        tau = tau - s / np.where(sd == 0, 1.0, sd)
    return q, p, tau


def _henon_guess(q0, p0, potential, section):
    """One RK4 step of the flow with ``s`` as independent variable (Henon's trick)."""
    d = q0.shape[-1]

    def rhs(z):
        q, p = z[..., :d], z[..., d:]
        g = potential.gradient(q)
        F = np.concatenate([p, -g], axis=-1)
        sd = section.sdot(q, p, g)
        sd = np.where(sd == 0, 1e-300, sd)
        return F / sd[..., None], 1.0 / sd

    z = np.concatenate([q0, p0], axis=-1)
    ds = -section.s(q0, p0)
    k1, t1 = rhs(z)
    k2, t2 = rhs(z + 0.5 * ds[..., None] * k1)
    k3, t3 = rhs(z + 0.5 * ds[..., None] * k2)
    k4, t4 = rhs(z + ds[..., None] * k3)
    return ds * (t1 + 2 * t2 + 2 * t3 + t4) / 6.0


def poincare_section(state: PhaseState, potential, section: SectionSpec, n_crossings, h,
                     scheme="order4", t_max=None) -> SectionResult:
    """First ``n_crossings`` directed crossings of a single orbit.

    Each crossing is bracketed by two steps, estimated with Henon's change of
    independent variable and polished by Newton so that ``|s| < tol`` for the
    scheme's own partial step.  Negative ``h`` runs the flow backwards (the
    crossing direction still refers to forward time).  If ``t_max`` elapses
    first the result is flagged ``truncated``.
    """
    weights = _check_scheme(scheme)
    if t_max is None:
        t_max = 1e4
    q, p, t = state.q.astype(float).copy(), state.p.astype(float).copy(), float(state.t)
    if q.ndim != 1:
        raise ValueError("poincare_section follows a single orbit; use section_map for batches")
    sign = 1.0 if h > 0 else -1.0
    st = _Stepper(potential, q)
    s_prev = section.s(q, p)
    out_t, out_q, out_p = [], [], []
    nmax = int(np.ceil(t_max / abs(h)))
    for _ in range(nmax):
        q1, p1, _, _ = st.step(q, p, h, weights)
        s1 = section.s(q1, p1)
        crossed = (s_prev < 0 <= s1) or (s_prev > 0 >= s1)
        if crossed:
            going_up = (s1 - s_prev) * sign > 0
            if section.direction == 0 or (section.direction > 0) == going_up:
                guess = abs(_henon_guess(q, p, potential, section))
                qc, pc, tau = _polish_crossing(q, p, sign, potential, section, weights, guess, abs(h))
                out_t.append(t + sign * tau)
                out_q.append(qc)
                out_p.append(pc)
                if len(out_t) == n_crossings:
                    break
        q, p, s_prev = q1, p1, s1
        t += h
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise IntegrationError(f"non-finite state at t={t:.6g}")
    truncated = len(out_t) < n_crossings
    d = q.shape[-1]
    return SectionResult(np.array(out_t), np.array(out_q).reshape(-1, d), np.array(out_p).reshape(-1, d), truncated)


def section_map(q, p, potential, section: SectionSpec, h, scheme="order4", t_max=50.0, tangent=None):
    """Batched first return to ``section`` for many initial points.

    Returns ``(q_c, p_c, t_c, ok)`` and, when ``tangent`` (shape
    ``(B, 2d, m)``) is given, the tangent vectors transported to the crossing
    and projected along the flow onto the section (variation of the first
    return map).  Initial points are assumed to lie on the section; the
    first step away from it never counts.
    """
    weights = _check_scheme(scheme)
    q = np.atleast_2d(np.asarray(q, dtype=float)).copy()
    p = np.atleast_2d(np.asarray(p, dtype=float)).copy()
    B, d = q.shape
    sign = 1.0 if h > 0 else -1.0
    use_tan = tangent is not None
    st = _Stepper(potential, q, tangent=use_tan)
    dq = tangent[:, :d, :].copy() if use_tan else None
    dp = tangent[:, d:, :].copy() if use_tan else None
    qc, pc, tc = np.full((B, d), np.nan), np.full((B, d), np.nan), np.full(B, np.nan)
    tan_c = np.full((B, 2 * d, tangent.shape[-1]), np.nan) if use_tan else None
    rows = np.arange(B)  # original index of each row still being integrated
    live = np.ones(B, dtype=bool)
    s_prev = section.s(q, p)
    t = 0.0
    nmax = int(np.ceil(t_max / abs(h)))
    for k in range(nmax):
        q0, p0 = q, p
        dq0, dp0 = dq, dp
        q, p, dq, dp = st.step(q, p, h, weights, dq, dp)
        s1 = section.s(q, p)
        crossed = live & (((s_prev < 0) & (s1 >= 0)) | ((s_prev > 0) & (s1 <= 0)))
        if k == 0:
            crossed &= np.abs(s_prev) > 1e-9
        if section.direction != 0:
            crossed &= ((s1 - s_prev) * sign > 0) == (section.direction > 0)
        if crossed.any():
            sel = np.flatnonzero(crossed)
            idx = rows[sel]
            q0c, p0c = q0[sel], p0[sel]
            guess = np.abs(_henon_guess(q0c, p0c, potential, section))
            qx, px, tau = _polish_crossing(q0c, p0c, sign, potential, section, weights, guess, abs(h))
            qc[idx], pc[idx], tc[idx] = qx, px, t + sign * tau
            if use_tan:
                s2 = _Stepper(potential, q0c, tangent=True)
                _, _, dqx, dpx = s2.step(q0c, p0c, sign * tau, weights, dq0[sel], dp0[sel])
                gx = potential.gradient(qx)
                F = np.concatenate([px, -gx], axis=-1)
                V = np.concatenate([dqx, dpx], axis=-2)
                num = np.einsum("i,bim->bm", section.a, V)
                den = F @ section.a
                tan_c[idx] = V - F[:, :, None] * (num / den[:, None])[:, None, :]
            live[sel] = False
        s_prev = s1
        t += h
        if k % 64 == 63:
            fin = np.all(np.isfinite(q), axis=1) & np.all(np.isfinite(p), axis=1)
            live &= fin
        n_live = int(live.sum())
        if n_live == 0:
            break
        if n_live <= live.size // 2 and live.size > 8:
            keep = np.flatnonzero(live)
            rows, q, p, s_prev = rows[keep], q[keep], p[keep], s_prev[keep]
            st.g = st.g[keep]
            if use_tan:
                st.H, dq, dp = st.H[keep], dq[keep], dp[keep]
            live = np.ones(keep.size, dtype=bool)
    ok = np.isfinite(tc)
    if use_tan:
        return qc, pc, tc, ok, tan_c
    return qc, pc, tc, ok


def write_trajectory_csv(path, traj: Trajectory):
    d = traj.q.shape[-1]
    header = ["t"] + [f"q_{j + 1}" for j in range(d)] + [f"p_{j + 1}" for j in range(d)] + ["H"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(traj.t)):
            w.writerow([repr(float(traj.t[i]))] + [repr(float(v)) for v in traj.q[i]]
                       + [repr(float(v)) for v in traj.p[i]] + [repr(float(traj.energy[i]))])


def write_section_csv(path, res: SectionResult, labels=None):
    pts = res.points
    if labels is None:
        d = pts.shape[-1] // 2
        labels = [f"q_{j + 1}" for j in range(d)] + [f"p_{j + 1}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + list(labels))
        for ti, row in zip(res.t, pts):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in row])
