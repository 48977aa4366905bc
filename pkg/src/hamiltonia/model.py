"""The rotor-pendulum model and its perturbative structure.

The potential is

    W_eta(x) = x_1^2 / 2 + sum_{j>=2} (1 - cos x_j) + (eta / 2) sum_{j>=2} (x_1 - x_j)^2

with Hamiltonian ``|P|^2 / 2 + W_eta``.  At ``eta = 0`` it is a harmonic
rotor plus ``d - 1`` uncoupled pendulums; each pendulum has a hyperbolic
equilibrium at ``x_j = pi`` whose separatrix is ``(P, x) = +/-(2 sech t,
2 arctan sinh t)``.  The Melnikov gradient along the heteroclinic cycle has
the closed form ``+/- 2 pi sqrt(2 I0) sech(pi/2) sin(theta - tau_j)``; the
module also evaluates it by quadrature as an independent check.

Pendulum actions, frequencies and the twist ``F''(I)`` use complete
elliptic integrals computed by the arithmetic-geometric mean.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .potential import Potential

__all__ = [
    "ModelParams",
    "ModelPotential",
    "weta",
    "separatrix",
    "pendulum_energy",
    "rotor_state",
    "saddle_point",
    "lyapunov_orbit_guess",
    "melnikov_grad_closed",
    "melnikov_grad_quadrature",
    "QuadratureError",
    "MelnikovResult",
    "melnikov_critical_points",
    "refine_critical_point",
    "melnikov_table",
    "write_melnikov_csv",
    "ellip_km",
    "PendulumAction",
    "pendulum_action",
    "pendulum_action_from_I",
    "Twist",
    "twist_determinant",
    "action_table",
    "write_action_csv",
    "Tangle",
    "heteroclinic_tangle",
    "separatrix_normal",
]

SECH_HALF_PI = 1.0 / math.cosh(math.pi / 2)


@dataclass(frozen=True)
class ModelParams:
    dim: int = 2
    eta: float = 0.05
    energy: float = 2.5

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("the model needs d >= 2 (one rotor, at least one pendulum)")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")

    @property
    def saddle_energy(self):
        """Energy of the unperturbed hyperbolic equilibria, ``2 (d - 1)``."""
        return 2.0 * (self.dim - 1)


class ModelPotential(Potential):
    def __init__(self, params: ModelParams):
        self.params = params
        self.dim = params.dim
        self.eta = float(params.eta)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        x1, xs = x[..., 0], x[..., 1:]
        return (0.5 * x1**2 + np.sum(1.0 - np.cos(xs), axis=-1)
                + 0.5 * self.eta * np.sum((x1[..., None] - xs) ** 2, axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        x1, xs = x[..., :1], x[..., 1:]
        diff = x1 - xs
        g = np.empty_like(x)
        g[..., :1] = x1 + self.eta * np.sum(diff, axis=-1, keepdims=True)
        g[..., 1:] = np.sin(xs) - self.eta * diff
        return g

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        d = self.dim
        H = np.zeros(x.shape + (d,))
        e = self.eta
        H[..., 0, 0] = 1.0 + e * (d - 1)
        H[..., 0, 1:] = -e
        H[..., 1:, 0] = -e
        idx = np.arange(1, d)
        H[..., idx, idx] = np.cos(x[..., 1:]) + e
        return H


def weta(params: ModelParams, x, order=0):
    """``W_eta`` and, for ``order`` 1 or 2, its gradient and Hessian."""
    return ModelPotential(params).evaluate(x, order)


def separatrix(t, sign=1):
    """``(P, x)`` on the pendulum separatrix at time ``t`` (upper branch for ``sign=+1``)."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    t = np.asarray(t, dtype=float)
    return sign * 2.0 / np.cosh(t), sign * 2.0 * np.arctan(np.sinh(t))


def pendulum_energy(P, x):
    return 0.5 * np.asarray(P) ** 2 + 1.0 - np.cos(x)


def rotor_state(I, theta):
    """Rotor ``(x_1, P_1)`` from action-angle ``(I, theta)``."""
    r = np.sqrt(2.0 * np.asarray(I, dtype=float))
    return r * np.sin(theta), r * np.cos(theta)


def saddle_point(params: ModelParams, side=1):
    """Critical point of ``W_eta`` continuing ``x = (0, side*pi, ..., side*pi)``."""
    pot = ModelPotential(params)
    x = np.zeros(params.dim)
    x[1:] = side * np.pi
    for _ in range(50):
        g, H = pot.gradient_hessian(x)
        dx = np.linalg.solve(H, -g)
        x = x + dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    return x


def lyapunov_orbit_guess(params: ModelParams, energy, side=1):
    """Linearised guess for the hyperbolic periodic orbit near the saddle.

    The orbit is the rotor-like elliptic mode of the saddle with amplitude
    fixed by the energy; the guess is its point on ``x_1 = 0, P_1 > 0`` in
    chart coordinates ``(x_2..x_d, P_2..P_d)``.
    """
    pot = ModelPotential(params)
    xs = saddle_point(params, side)
    excess = float(energy - pot.value(xs))
    if excess <= 0:
        raise ValueError(f"energy {energy} lies below the saddle energy {energy - excess:.6f}")
    w2, vecs = np.linalg.eigh(pot.hessian(xs))
    k = int(np.argmax(w2))
    om, v = math.sqrt(w2[k]), vecs[:, k] * np.sign(vecs[0, k])
    A = math.sqrt(2.0 * excess) / om
    if A <= abs(xs[0] / v[0]):
        raise ValueError("energy too low for the orbit to reach x_1 = 0")
    s = -xs[0] / (A * v[0])
    c = math.sqrt(1.0 - s * s)
    x = xs + A * s * v
    P = A * om * c * v
    return np.concatenate([x[1:], P[1:]])


# ---------------------------------------------------------------------------
# Melnikov gradient
# ---------------------------------------------------------------------------


def _check_sign(sign):
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")


def melnikov_grad_closed(I0, theta, tau, sign=1):
    """``sign * 2 pi sqrt(2 I0) sech(pi/2) sin(theta - tau)``."""
    _check_sign(sign)
    if np.any(np.asarray(I0) <= 0):
        raise ValueError("I0 must be positive")
    return sign * 2.0 * np.pi * np.sqrt(2.0 * np.asarray(I0)) * SECH_HALF_PI * np.sin(np.asarray(theta) - np.asarray(tau))


class QuadratureError(RuntimeError):
    pass


def _truncation_bound(I0, T):
    # |integrand| <= 2 (sqrt(2 I0) + pi) * 2 e^{-|s|}; two tails of mass e^{-T}
    return 8.0 * (math.sqrt(2.0 * I0) + math.pi) * math.exp(-T)


def melnikov_grad_quadrature(I0, theta, tau, sign=1, T=40.0, tol=1e-10, odd_part=True):
    """Melnikov gradient by adaptive Gauss-Kronrod quadrature on ``[-T, T]``.

    The integral is taken in the shifted variable ``s = sigma + tau``; the
    neglected tails are bounded by ``8 (sqrt(2 I0) + pi) exp(-T)``.  Setting
    ``odd_part=False`` drops the ``arctan(sinh s) sech s`` term.  Raises
    :class:`QuadratureError` when the truncation bound plus the reported
    quadrature error exceeds ``tol``.
    """
    _check_sign(sign)
    if I0 <= 0:
        raise ValueError("I0 must be positive")
    if T < 30:
        raise ValueError("T must be at least 30")
    if tol <= 0:
        raise ValueError("tol must be positive")
    r = math.sqrt(2.0 * I0)
    phase = float(theta) - float(tau)
    c = 2.0 if odd_part else 0.0

    def f(s):
        return (r * math.sin(s + phase) - sign * c * math.atan(math.sinh(s))) / math.cosh(s)

    val, err = integrate.quad(f, -T, T, epsabs=0.1 * tol, epsrel=0.0, limit=400)
    bound = _truncation_bound(I0, T)
    if err + bound > tol:
        raise QuadratureError(f"tolerance {tol:g} unattainable at T={T:g} "
                              f"(quadrature error {err:.2e}, truncation bound {bound:.2e})")
    return 2.0 * sign * val


def _melnikov_hess_quadrature(I0, theta, tau, sign, T=40.0):
    r = math.sqrt(2.0 * I0)
    phase = float(theta) - float(tau)
    val, _ = integrate.quad(lambda s: -r * math.cos(s + phase) / math.cosh(s), -T, T,
                            epsabs=1e-13, epsrel=0.0, limit=400)
    return 2.0 * sign * val


@dataclass
class MelnikovResult:
    theta: float
    I0: float
    sign: int
    critical_points: list
    hessian_det: list
    grad_closed: list = field(default_factory=list)
    grad_quad: list = field(default_factory=list)


def melnikov_critical_points(theta, d, I0=0.5, sign=1, quadrature=False):
    """Critical points ``tau = theta + pi k`` of the Melnikov potential.

    ``k`` runs over ``{0, 1}^{d-1}``; the Hessian is diagonal with entries
    ``-sign 2 pi sqrt(2 I0) sech(pi/2) (-1)^{k_j}``, so every point is
    nondegenerate.  With ``quadrature=True`` the gradient at each point is
    also evaluated numerically.
    """
    if d < 2:
        raise ValueError("d must be at least 2")
    _check_sign(sign)
    amp = 2.0 * np.pi * np.sqrt(2.0 * I0) * SECH_HALF_PI
    pts, dets, gc, gq = [], [], [], []
    for k in itertools.product((0, 1), repeat=d - 1):
        tau = np.mod(theta + np.pi * np.asarray(k, dtype=float), 2 * np.pi)
        pts.append(tau)
        dets.append(float(np.prod([-sign * amp * (-1) ** kj for kj in k])))
        gc.append(melnikov_grad_closed(I0, theta, tau, sign))
        if quadrature:
            gq.append(np.array([melnikov_grad_quadrature(I0, theta, tj, sign) for tj in tau]))
    return MelnikovResult(float(theta), float(I0), sign, pts, dets, gc, gq)


def refine_critical_point(I0, theta, tau0, sign=1, T=40.0, tol=1e-12, maxiter=50):
    """Newton iteration on the quadrature gradient in one ``tau_j``."""
    tau = float(tau0)
    for _ in range(maxiter):
        g = melnikov_grad_quadrature(I0, theta, tau, sign, T, tol=1e-10)
        dg = _melnikov_hess_quadrature(I0, theta, tau, sign, T)
        step = g / dg
        tau -= step
        if abs(step) < tol:
            return tau
    raise QuadratureError("Newton iteration on the Melnikov gradient did not converge")


def melnikov_table(I0, theta, grid, sign=1, T=40.0, tol=1e-10):
    """Rows ``(theta, tau, closed, quadrature, abs_err)`` for ``grid`` values of tau in ``[0, 2 pi)``."""
    rows = []
    for tau in 2 * np.pi * np.arange(grid) / grid:
        c = float(melnikov_grad_closed(I0, theta, tau, sign))
        q = melnikov_grad_quadrature(I0, theta, tau, sign, T, tol)
        rows.append((float(theta), float(tau), c, q, abs(c - q)))
    return rows


def write_melnikov_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "tau", "closed", "quadrature", "abs_err"])
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


# ---------------------------------------------------------------------------
# Pendulum action-angle data
# ---------------------------------------------------------------------------


def ellip_km(k):
    """Complete elliptic integrals ``(K(k), E(k))`` of modulus ``k`` by AGM."""
    if not 0 <= k < 1:
        raise ValueError("modulus must lie in [0, 1)")
    a, b, c = 1.0, math.sqrt(1.0 - k * k), k
    s = 0.5 * c * c
    pw = 0.5
    for _ in range(60):
        if abs(c) < 1e-17:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        pw *= 2.0
        s += pw * c * c
    K = math.pi / (2.0 * a)
    return K, K * (1.0 - s)


@dataclass(frozen=True)
class PendulumAction:
    E: float
    I: float
    Omega: float
    Fpp: float

    @property
    def period(self):
        return 2 * math.pi / self.Omega


def pendulum_action(E) -> PendulumAction:
    """Action, frequency and ``F''(I)`` of the libration of ``P^2/2 + 1 - cos x`` at energy ``E``."""
    E = float(E)
    if not 0 < E < 2:
        raise ValueError("libration energies lie in (0, 2)")
    k = math.sqrt(E / 2.0)
    kp2 = 1.0 - k * k
    K, Ek = ellip_km(k)
    I = 8.0 / math.pi * (Ek - kp2 * K)
    Om = math.pi / (2.0 * K)
    dK_dk = Ek / (k * kp2) - K / k
    dOm_dE = -math.pi / (2.0 * K * K) * dK_dk / (4.0 * k)
    return PendulumAction(E, I, Om, Om * dOm_dE)


def pendulum_action_from_I(I) -> PendulumAction:
    """Invert the action: ``I`` ranges over ``(0, 8/pi)``."""
    I = float(I)
    if not 0 < I < 8 / math.pi:
        raise ValueError("libration actions lie in (0, 8/pi)")
    E = optimize.brentq(lambda e: pendulum_action(e).I - I, 1e-300, 2 - 1e-15, xtol=1e-15, rtol=1e-15)
    return pendulum_action(E)


@dataclass(frozen=True)
class Twist:
    det: float
    fpp: tuple
    degenerate: bool


def twist_determinant(I_vector, eps=1e-8) -> Twist:
    """``(-1)^d prod_j F''(I_j)`` for pendulum actions ``I_1 .. I_{d-1}``."""
    I_vector = np.atleast_1d(np.asarray(I_vector, dtype=float))
    d = I_vector.size + 1
    fpp = tuple(pendulum_action_from_I(I).Fpp for I in I_vector)
    det = (-1) ** d * float(np.prod(fpp))
    return Twist(det, fpp, abs(det) < eps)


def action_table(energies):
    return [pendulum_action(E) for E in energies]


def write_action_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["E", "I", "Omega", "Fpp"])
        for a in table:
            w.writerow([repr(a.E), repr(a.I), repr(a.Omega), repr(a.Fpp)])


# ---------------------------------------------------------------------------
# Heteroclinic tangle in the section x_1 = 0, P_1 > 0 (d = 2)
# ---------------------------------------------------------------------------


@dataclass
class Tangle:
    params: ModelParams
    energy: float
    orbits: dict
    unstable: object
    stable: object
    crossings: list
    phases: list

    @property
    def saddles(self):
        return np.array([self.orbits[-1].z, self.orbits[1].z])


def _cut_at(trace, target, radius):
    """Truncate a trace at its first approach to ``target``."""
    dist = np.linalg.norm(trace.points - target, axis=1)
    hit = np.flatnonzero(dist < radius)
    if hit.size:
        k = hit[0] + 1
        trace.points, trace.arclength = trace.points[:k], trace.arclength[:k]
    return trace


def heteroclinic_tangle(params: ModelParams, energy=None, arclen_max=8.5, saddle_radius=0.15,
                        angle_min=1e-3, **trace_kw) -> Tangle:
    """Unstable manifold of the orbit near ``x_2 = -pi`` against the stable one near ``+pi``.

    Both traces are cut where they first come within ``saddle_radius`` of
    the opposite fixed point; crossings inside that radius of either fixed
    point are discarded, since near the fixed points the two traces
    accumulate and carry no information about splitting.
    """
    from .chaos import (SectionChart, away_from, crossing_phase, detect_transverse_crossings,
                        find_periodic_orbit, trace_manifold)

    if params.dim != 2:
        raise ValueError("the section construction is implemented for d = 2")
    energy = params.energy if energy is None else float(energy)
    pot = ModelPotential(params)
    chart = SectionChart(pot, energy)
    orbits = {side: find_periodic_orbit(lyapunov_orbit_guess(params, energy, side), chart,
                                        period_hint=2 * math.pi) for side in (-1, 1)}
    tu = trace_manifold(orbits[-1], 1, "unstable", arclen_max, **trace_kw)
    ts = trace_manifold(orbits[1], 1, "stable", arclen_max, **trace_kw)
    _cut_at(tu, orbits[1].z, saddle_radius)
    _cut_at(ts, orbits[-1].z, saddle_radius)
    cr = detect_transverse_crossings(tu, ts, angle_min)
    cr = away_from(cr, [orbits[-1].z, orbits[1].z], saddle_radius)
    phases = [crossing_phase(c.point, chart) for c in cr]
    return Tangle(params, energy, orbits, tu, ts, cr, phases)


def separatrix_normal(t):
    """Point of the positive separatrix at time ``t`` and its unit normal, in ``(x, P)`` order."""
    P, x = separatrix(t)
    n = np.array([math.tanh(t), 1.0])
    return np.array([float(x), float(P)]), n / np.linalg.norm(n)
