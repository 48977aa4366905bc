"""Random trigonometric potentials on the torus and band-limited fields on R^d.

Two Gaussian ensembles live here:

* :class:`TorusPotential`, the degree-``L`` trigonometric polynomial

      V(q) = d_L^{-1/2} sum_{0 < |n|_inf <= L} a_n exp(i n.q),
      d_L = (2L + 1)^d - 1,

  with Hermitian coefficients ``a_n = conj(a_{-n})`` whose real and imaginary
  parts are independent N(0, 1/2).

* :class:`BandLimitedField`, the truncated sinc expansion

      W(x) = sum_{|n_j| <= N} b_n prod_j sinc(n_j + cutoff * x_j / pi),

  with i.i.d. standard normal ``b_n``.  Its covariance is the product
  Dirichlet kernel ``prod_j sin(cutoff x_j) / (cutoff x_j)``.  The tail of
  the series beyond ``N`` has mean-square size ``O(N^{-d})`` at fixed ``x``
  (each basis function and its derivatives decay like
  ``prod_j [1 + (n_j + y_j)^2]^{-1/2}``), so the truncation error of a sample
  is ``O(N^{-d/2})`` in root mean square.

Both classes are immutable and evaluate vectorised over leading axes.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .potential import Potential
from .rng import RngSeed, as_seed, generator

__all__ = [
    "TorusPotential",
    "BandLimitedField",
    "RescaledPotential",
    "CovarianceSpec",
    "FddTable",
    "torus_indices",
    "sample_torus_potential",
    "eval_torus",
    "sample_field",
    "eval_field",
    "rescale_potential",
    "sinc_derivatives",
    "covariance_analytic",
    "ergodic_average",
    "fdd_compare",
    "covariance_table",
    "write_covariance_csv",
    "save_json",
    "load_json",
    "DEFAULT_FIELD_TRUNCATION",
]

DEFAULT_FIELD_TRUNCATION = {1: 64, 2: 32}


def torus_indices(d, L):
    """All ``n`` with ``0 < |n|_inf <= L`` in lexicographic order, shape ``(d_L, d)``."""
    grid = np.array(list(itertools.product(range(-L, L + 1), repeat=d)), dtype=int)
    return grid[np.any(grid != 0, axis=1)]


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


class _SeparableSum:
    """Evaluate ``sum_n C[n] prod_j F_j^{(k_j)}[.., n_j]`` for several order tuples.

    ``factors[j][k]`` has shape ``(B, M)``; partial contractions are memoised
    by order prefix so gradient and Hessian components share the leading
    matrix products.
    """

    def __init__(self, coeffs, factors):
        self.coeffs = coeffs
        self.factors = factors
        self.d = coeffs.ndim
        self.M = coeffs.shape[0]
        self._memo = {}

    def partial(self, prefix):
        if prefix in self._memo:
            return self._memo[prefix]
        k = len(prefix)
        if k == 1:
            out = self.factors[0][prefix[0]] @ self.coeffs.reshape(self.M, -1)
        else:
            prev = self.partial(prefix[:-1])
            B = prev.shape[0]
            prev = prev.reshape(B, self.M, -1)
            out = np.einsum("bm,bmr->br", self.factors[k - 1][prefix[-1]], prev)
        self._memo[prefix] = out
        return out

    def __call__(self, orders):
        return self.partial(tuple(orders))[:, 0]


def _derivative_orders(d, order):
    out = [(0,) * d]
    if order >= 1:
        for j in range(d):
            o = [0] * d
            o[j] = 1
            out.append(tuple(o))
    if order >= 2:
        for j in range(d):
            for k in range(j, d):
                o = [0] * d
                o[j] += 1
                o[k] += 1
                out.append(tuple(o))
    return out


def _assemble(values, d, order, lead_shape):
    """Pack a dict of order-tuple -> (B,) arrays into value / grad / Hessian arrays."""
    val = values[(0,) * d].reshape(lead_shape)
    if order == 0:
        return val
    grad = np.stack([values[tuple(int(i == j) for i in range(d))] for j in range(d)], axis=-1)
    grad = grad.reshape(lead_shape + (d,))
    if order == 1:
        return val, grad
    hess = np.empty((grad.reshape(-1, d).shape[0], d, d), dtype=grad.dtype)
    for j in range(d):
        for k in range(j, d):
            o = [0] * d
            o[j] += 1
            o[k] += 1
            hess[:, j, k] = hess[:, k, j] = values[tuple(o)]
    return val, grad, hess.reshape(lead_shape + (d, d))


# ---------------------------------------------------------------------------
# Trigonometric ensemble on the torus
# ---------------------------------------------------------------------------


def _exp_powers(theta, L):
    """``exp(i m theta)`` for ``m = -L..L`` by repeated multiplication, shape ``(B, 2L+1)``."""
    B = theta.shape[0]
    out = np.empty((B, 2 * L + 1), dtype=complex)
    out[:, L] = 1.0
    out[:, L + 1:] = np.cumprod(np.broadcast_to(np.exp(1j * theta)[:, None], (B, L)), axis=1)
    out[:, :L] = np.conj(out[:, :L:-1])
    return out


@dataclass(frozen=True, eq=False)
class TorusPotential(Potential):
    """Degree-``L`` Hermitian trigonometric polynomial on the ``d``-torus.

    ``dense`` holds ``a_n`` at index ``n + L`` (shape ``(2L+1,)*d``); the
    centre entry (zero mode) is always 0.
    """

    dim: int
    degree: int
    dense: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = 2 * self.degree + 1
        dense = np.array(self.dense, dtype=complex)
        if dense.shape != (M,) * self.dim:
            raise ValueError(f"coefficient array must have shape {(M,) * self.dim}")
        dense.setflags(write=False)
        object.__setattr__(self, "dense", dense)
        object.__setattr__(self, "_m", np.arange(-self.degree, self.degree + 1, dtype=float))

    @property
    def norm_const(self):
        return (2 * self.degree + 1) ** self.dim - 1

    @property
    def indices(self):
        return torus_indices(self.dim, self.degree)

    @property
    def coeffs(self):
        """Mapping ``tuple(n) -> a_n`` over ``0 < |n|_inf <= L``."""
        flat = self.coefficient_vector()
        return {tuple(int(v) for v in n): complex(a) for n, a in zip(self.indices, flat)}

    def coefficient_vector(self):
        """``a_n`` in lexicographic ``n`` order (zero mode dropped)."""
        flat = self.dense.reshape(-1)
        c = flat.size // 2
        return np.concatenate([flat[:c], flat[c + 1:]])

    @classmethod
    def from_coefficients(cls, dim, degree, coeffs):
        """Build from a mapping ``n -> a_n``; missing entries are zero.

        Only entries actually given are checked for Hermitian consistency; a
        lone ``a_n`` gets its partner ``conj(a_n)`` filled in.
        """
        M = 2 * degree + 1
        dense = np.zeros((M,) * dim, dtype=complex)
        given = set()
        for n, a in coeffs.items():
            n = tuple(int(v) for v in n)
            if len(n) != dim:
                raise ValueError(f"index {n} does not have dimension {dim}")
            if all(v == 0 for v in n):
                raise ValueError("the zero mode carries no coefficient")
            if max(abs(v) for v in n) > degree:
                raise ValueError(f"index {n} exceeds degree {degree}")
            dense[tuple(v + degree for v in n)] = a
            given.add(n)
        for n in given:
            neg = tuple(-v for v in n)
            a = dense[tuple(v + degree for v in n)]
            b = dense[tuple(v + degree for v in neg)]
            if neg in given:
                if abs(a - np.conj(b)) > 1e-12 * max(1.0, abs(a)):
                    raise ValueError(f"coefficients at {n} and {neg} are not conjugate")
            else:
                dense[tuple(v + degree for v in neg)] = np.conj(a)
        return cls(dim, degree, dense)

    @classmethod
    def zero(cls, dim, degree):
        return cls(dim, degree, np.zeros((2 * degree + 1,) * dim, dtype=complex))

    def _factors(self, q, order):
        m = self._m
        L = self.degree
        factors = []
        for j in range(self.dim):
            e = _exp_powers(q[:, j], L)
            fj = [e]
            if order >= 1:
                fj.append(1j * m * e)
            if order >= 2:
                fj.append(-(m * m) * e)
            factors.append(fj)
        return factors

    def evaluate(self, q, order=0, real=True):
        """Value and derivatives up to ``order``; ``real=False`` keeps the complex sums."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        q = _as_points(q, self.dim)
        lead = q.shape[:-1]
        qf = q.reshape(-1, self.dim)
        s = _SeparableSum(self.dense, self._factors(qf, order))
        scale = 1.0 / math.sqrt(self.norm_const)
        vals = {}
        for o in _derivative_orders(self.dim, order):
            v = s(o) * scale
            vals[o] = v.real if real else v
        return _assemble(vals, self.dim, order, lead)

    def value(self, q):
        return self.evaluate(q, 0)

    def gradient(self, q):
        return self.evaluate(q, 1)[1]

    def hessian(self, q):
        return self.evaluate(q, 2)[2]

    def gradient_hessian(self, q):
        _, g, h = self.evaluate(q, 2)
        return g, h

    def to_json(self):
        a = self.coefficient_vector()
        return {
            "kind": "torus_potential",
            "dim": self.dim,
            "degree": self.degree,
            "norm_const": self.norm_const,
            "coefficients": [
                {"n": [int(v) for v in n], "re": float(c.real), "im": float(c.imag)}
                for n, c in zip(self.indices, a)
            ],
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("kind") != "torus_potential":
            raise ValueError("not a torus_potential record")
        coeffs = {tuple(c["n"]): complex(c["re"], c["im"]) for c in obj["coefficients"]}
        return cls.from_coefficients(int(obj["dim"]), int(obj["degree"]), coeffs)


def sample_torus_potential(d, L, seed) -> TorusPotential:
    """Draw ``V^L`` on the ``d``-torus; deterministic in ``seed``."""
    if int(d) < 1 or int(L) < 1:
        raise ValueError(f"need d >= 1 and L >= 1, got d={d}, L={L}")
    d, L = int(d), int(L)
    rng = generator(seed)
    size = (2 * L + 1) ** d
    c = size // 2
    z = rng.standard_normal((c, 2)) / math.sqrt(2.0)
    flat = np.zeros(size, dtype=complex)
    flat[c + 1:] = z[:, 0] + 1j * z[:, 1]
    # n -> -n reverses the C-ordered flat index
    flat[:c] = np.conj(flat[c + 1:][::-1])
    return TorusPotential(d, L, flat.reshape((2 * L + 1,) * d))


def eval_torus(pot: TorusPotential, q, order=0):
    return pot.evaluate(q, order)


class RescaledPotential(Potential):
    """``x -> V(q0 + scale * x)`` with chain-rule derivatives."""

    def __init__(self, base, q0, scale):
        self.base = base
        self.dim = base.dim
        self.q0 = np.asarray(q0, dtype=float).reshape(self.dim)
        self.scale = float(scale)

    def _q(self, x):
        return self.q0 + self.scale * np.asarray(x, dtype=float)

    def evaluate(self, x, order=0):
        out = self.base.evaluate(self._q(x), order)
        if order == 0:
            return out
        s = self.scale
        return tuple(o * s**k for k, o in enumerate(out))

    def value(self, x):
        return self.base.value(self._q(x))

    def gradient(self, x):
        return self.scale * self.base.gradient(self._q(x))

    def hessian(self, x):
        return self.scale**2 * self.base.hessian(self._q(x))

    def gradient_hessian(self, x):
        g, h = self.base.gradient_hessian(self._q(x))
        return self.scale * g, self.scale**2 * h


def rescale_potential(pot: TorusPotential, q0, cutoff) -> RescaledPotential:
    """``V^{L,q0}(x) = V^L(q0 + cutoff * x / L)``."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    return RescaledPotential(pot, q0, cutoff / pot.degree)


# ---------------------------------------------------------------------------
# sinc machinery
# ---------------------------------------------------------------------------


def _sinu_derivatives(u, kmax):
    """Derivatives 0..kmax of ``sin(u)/u`` (value 1 at 0)."""
    u = np.asarray(u, dtype=float)
    out = np.empty((kmax + 1,) + u.shape)
    small = np.abs(u) < 1.5
    us = np.where(small, u, 0.0)
    # Taylor series, 24 terms is ample on |u| < 1.5
    for k in range(kmax + 1):
        acc = np.zeros_like(us)
        for m in range(24):
            p = 2 * m - k
            if p < 0:
                continue
            coef = (-1) ** m * math.factorial(2 * m) / (math.factorial(p) * math.factorial(2 * m + 1))
            acc = acc + coef * us**p
        out[k] = acc
    ul = np.where(small, 1.0, u)
    s, c = np.sin(ul), np.cos(ul)
    sin_derivs = [s, c, -s, -c]
    g = s / ul
    big = [g]
    for k in range(1, kmax + 1):
        g = (sin_derivs[k % 4] - k * g) / ul
        big.append(g)
    for k in range(kmax + 1):
        out[k] = np.where(small, out[k], big[k])
    return out


def sinc_derivatives(t, kmax=2):
    """Derivatives 0..kmax of the normalised sinc ``sin(pi t)/(pi t)``."""
    t = np.asarray(t, dtype=float)
    g = _sinu_derivatives(np.pi * t, kmax)
    return np.stack([g[k] * np.pi**k for k in range(kmax + 1)])


# ---------------------------------------------------------------------------
# Band-limited field on R^d
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BandLimitedField(Potential):
    """Truncated sinc expansion with real coefficients ``b_n``, ``|n_j| <= N``."""

    dim: int
    cutoff: float
    truncation: int
    dense: np.ndarray = field(repr=False)

    def __post_init__(self):
        M = 2 * self.truncation + 1
        dense = np.array(self.dense, dtype=float)
        if dense.shape != (M,) * self.dim:
            raise ValueError(f"coefficient array must have shape {(M,) * self.dim}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        dense.setflags(write=False)
        object.__setattr__(self, "dense", dense)
        object.__setattr__(self, "_m", np.arange(-self.truncation, self.truncation + 1, dtype=float))

    @property
    def coeffs(self):
        idx = itertools.product(range(-self.truncation, self.truncation + 1), repeat=self.dim)
        return {tuple(n): float(b) for n, b in zip(idx, self.dense.reshape(-1))}

    def _factors(self, x, order):
        s = self.cutoff / np.pi
        factors = []
        for j in range(self.dim):
            t = self._m[None, :] + s * x[:, j, None]
            sd = sinc_derivatives(t, order)
            factors.append([sd[k] * s**k for k in range(order + 1)])
        return factors

    def evaluate(self, x, order=0):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        x = _as_points(x, self.dim)
        lead = x.shape[:-1]
        xf = x.reshape(-1, self.dim)
        s = _SeparableSum(self.dense, self._factors(xf, order))
        vals = {o: s(o) for o in _derivative_orders(self.dim, order)}
        return _assemble(vals, self.dim, order, lead)

    def value(self, x):
        return self.evaluate(x, 0)

    def gradient(self, x):
        return self.evaluate(x, 1)[1]

    def hessian(self, x):
        return self.evaluate(x, 2)[2]

    def gradient_hessian(self, x):
        _, g, h = self.evaluate(x, 2)
        return g, h

    def to_json(self):
        idx = itertools.product(range(-self.truncation, self.truncation + 1), repeat=self.dim)
        return {
            "kind": "band_limited_field",
            "dim": self.dim,
            "cutoff": self.cutoff,
            "truncation": self.truncation,
            "coefficients": [{"n": list(n), "b": float(b)} for n, b in zip(idx, self.dense.reshape(-1))],
        }

    @classmethod
    def from_json(cls, obj):
        if obj.get("kind") != "band_limited_field":
            raise ValueError("not a band_limited_field record")
        d, N = int(obj["dim"]), int(obj["truncation"])
        dense = np.zeros((2 * N + 1,) * d)
        for c in obj["coefficients"]:
            dense[tuple(v + N for v in c["n"])] = c["b"]
        return cls(d, float(obj["cutoff"]), N, dense)


def sample_field(d, cutoff, N=None, seed=0) -> BandLimitedField:
    """Draw the truncated field with i.i.d. N(0, 1) coefficients."""
    if int(d) < 1:
        raise ValueError("d must be >= 1")
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if N is None:
        N = DEFAULT_FIELD_TRUNCATION.get(int(d), 16)
    if int(N) < 1:
        raise ValueError("truncation N must be >= 1")
    d, N = int(d), int(N)
    b = generator(seed).standard_normal((2 * N + 1,) * d)
    return BandLimitedField(d, float(cutoff), N, b)


def eval_field(fld: BandLimitedField, x, order=0):
    return fld.evaluate(x, order)


# ---------------------------------------------------------------------------
# Covariance kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceSpec:
    """``kind`` is ``"torus"`` (rescaled kappa^L) or ``"continuum"`` (kappa_W)."""

    kind: str
    dim: int
    cutoff: float = math.pi
    degree: int | None = None

    def __post_init__(self):
        if self.kind not in ("torus", "continuum"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "torus" and (self.degree is None or self.degree < 1):
            raise ValueError("torus covariance needs a degree L >= 1")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")


def _dirichlet_axis(u, L, k):
    """k-th derivative of sum_{|m|<=L} exp(i m u), real part."""
    m = np.arange(-L, L + 1, dtype=float)
    ph = np.multiply.outer(u, m)
    if k % 2 == 0:
        return (-1) ** (k // 2) * np.sum(m**k * np.cos(ph), axis=-1)
    return (-1) ** ((k + 1) // 2) * np.sum(m**k * np.sin(ph), axis=-1)


def covariance_analytic(spec: CovarianceSpec, x, alpha=None):
    """``kappa(x)`` or its partial derivative ``d^alpha kappa(x)`` for displacements ``x``.

    ``torus``: ``d_L^{-1} sum_{0<|n|_inf<=L} cos(cutoff n.x / L)``.
    ``continuum``: ``prod_j sin(cutoff x_j) / (cutoff x_j)``.
    """
    d = spec.dim
    x = _as_points(x, d)
    alpha = (0,) * d if alpha is None else tuple(int(a) for a in alpha)
    if len(alpha) != d or min(alpha) < 0:
        raise ValueError("alpha must be a non-negative multi-index of length d")
    lam = spec.cutoff
    if spec.kind == "continuum":
        out = np.ones(x.shape[:-1])
        for j in range(d):
            g = _sinu_derivatives(lam * x[..., j], alpha[j])[alpha[j]]
            out = out * g * lam ** alpha[j]
        return out
    L = spec.degree
    s = lam / L
    prod = np.ones(x.shape[:-1])
    for j in range(d):
        prod = prod * _dirichlet_axis(s * x[..., j], L, alpha[j]) * s ** alpha[j]
    if not any(alpha):
        prod = prod - 1.0
    return prod / ((2 * L + 1) ** d - 1)


# ---------------------------------------------------------------------------
# Statistical diagnostics
# ---------------------------------------------------------------------------


def _ball_grid(d, R, spacing):
    n = int(math.floor(R / spacing))
    axis = spacing * np.arange(-n, n + 1)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts[np.sum(pts * pts, axis=1) <= R * R + 1e-12]


def ergodic_average(fld: BandLimitedField, functional, R_list, spacing=0.1):
    """Averages of ``functional(tau_y W)`` over grids of ``y`` in the balls ``B_R``.

    ``functional(field, y)`` receives the field and an array ``y`` of shape
    ``(M, d)`` and returns the ``M`` values ``Phi(tau_y W)``; for instance
    ``lambda f, y: f.value(y) ** 2`` is ``Phi(w) = w(0)^2``.
    """
    R_list = list(R_list)
    if not R_list:
        raise ValueError("R_list must not be empty")
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError("R_list must be increasing")
    out = []
    for R in R_list:
        y = _ball_grid(fld.dim, float(R), spacing)
        vals = np.asarray(functional(fld, y), dtype=float)
        out.append(float(np.mean(np.broadcast_to(vals, (y.shape[0],)))))
    return np.array(out)


@dataclass
class FddTable:
    points: np.ndarray
    multiindices: list
    sigma_L: np.ndarray
    sigma_W: np.ndarray
    sigma_emp: np.ndarray
    n_samples: int

    @property
    def dev_empirical(self):
        """max |Sigma_emp - Sigma^L|"""
        return float(np.max(np.abs(self.sigma_emp - self.sigma_L)))

    @property
    def dev_limit(self):
        """max |Sigma^L - Sigma|"""
        return float(np.max(np.abs(self.sigma_L - self.sigma_W)))


def _covariance_matrix(spec, points, multiindices):
    n = len(points)
    S = np.empty((n, n))
    for l in range(n):
        for m in range(n):
            a, b = multiindices[l], multiindices[m]
            total = tuple(i + j for i, j in zip(a, b))
            S[l, m] = (-1) ** sum(b) * covariance_analytic(spec, points[l] - points[m], total)
    return S


def _multiindex_design(d, L, q0, scale, points, multiindices):
    """Rows map coefficient vectors to ``d^alpha V^{L,q0}(x)``, complex (n_pts, d_L)."""
    idx = torus_indices(d, L).astype(float)
    rows = []
    for x, a in zip(points, multiindices):
        q = q0 + scale * x
        w = np.prod((1j * idx) ** np.asarray(a, dtype=float), axis=1)
        rows.append(w * np.exp(1j * idx @ q) * scale ** sum(a))
    return np.array(rows) / math.sqrt(idx.shape[0])


def fdd_compare(d, L, q0, cutoff, points, multiindices=None, n_samples=2000, seed=0) -> FddTable:
    """Empirical vs analytic covariance of a finite-dimensional jet of ``V^{L,q0}``.

    ``n_samples`` independent potentials are drawn from sub-streams of
    ``seed``; entries of the empirical matrix use the known zero mean.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if multiindices is None:
        multiindices = [(0,) * d] * len(points)
    multiindices = [tuple(int(v) for v in a) for a in multiindices]
    if len(multiindices) != len(points):
        raise ValueError("need one multi-index per point")
    if any(sum(a) > 2 for a in multiindices):
        raise ValueError("multi-indices of order > 2 are not supported")
    q0 = np.broadcast_to(np.asarray(q0, dtype=float), (d,))
    scale = cutoff / L
    design = _multiindex_design(d, L, q0, scale, points, multiindices)
    base = as_seed(seed)
    samples = np.empty((n_samples, len(points)))
    for s in range(n_samples):
        pot = sample_torus_potential(d, L, base.child(s))
        samples[s] = (design @ pot.coefficient_vector()).real
    emp = samples.T @ samples / n_samples
    sL = _covariance_matrix(CovarianceSpec("torus", d, cutoff, L), points, multiindices)
    sW = _covariance_matrix(CovarianceSpec("continuum", d, cutoff), points, multiindices)
    return FddTable(points, multiindices, sL, sW, emp, n_samples)


def covariance_table(d, L, cutoff, grid):
    """Rows ``(x..., kappa_L, kappa_W, |diff|)`` for displacement points ``grid``."""
    grid = _as_points(grid, d).reshape(-1, d)
    kL = covariance_analytic(CovarianceSpec("torus", d, cutoff, L), grid)
    kW = covariance_analytic(CovarianceSpec("continuum", d, cutoff), grid)
    return np.column_stack([grid, kL, kW, np.abs(kL - kW)])


def write_covariance_csv(path, table, d):
    header = [f"x_{j + 1}" for j in range(d)] + ["kappa_L", "kappa_W", "abs_diff"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            w.writerow([repr(float(v)) for v in row])


def save_json(obj, path):
    Path(path).write_text(json.dumps(obj.to_json(), indent=1))


def load_json(path):
    obj = json.loads(Path(path).read_text())
    kind = obj.get("kind")
    if kind == "torus_potential":
        return TorusPotential.from_json(obj)
    if kind == "band_limited_field":
        return BandLimitedField.from_json(obj)
    raise ValueError(f"unknown record kind {kind!r}")
