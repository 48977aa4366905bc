"""Minimal potential interface shared by the integrators and indicators.

A potential is any object with a ``dim`` attribute and vectorised
``value``, ``gradient`` and ``hessian`` methods taking positions of shape
``(..., dim)`` and returning arrays of shape ``(...)``, ``(..., dim)`` and
``(..., dim, dim)``.  Subclassing :class:`Potential` is optional; it only
supplies conveniences on top of those three methods.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Potential",
    "ZeroPotential",
    "HarmonicPotential",
    "PendulumPotential",
    "CosinePotential",
    "hamiltonian",
]


class Potential:
    dim: int

    def value(self, q):
        raise NotImplementedError

    def gradient(self, q):
        raise NotImplementedError

    def hessian(self, q):
        raise NotImplementedError

    def gradient_hessian(self, q):
        """Gradient and Hessian together; override when they share work."""
        return self.gradient(q), self.hessian(q)

    def evaluate(self, q, order=0):
        """Value, and gradient/Hessian up to ``order`` (0, 1 or 2)."""
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        out = [self.value(q)]
        if order >= 1:
            out.append(self.gradient(q))
        if order == 2:
            out.append(self.hessian(q))
        return out[0] if order == 0 else tuple(out)

    def __call__(self, q):
        return self.value(q)


def hamiltonian(potential, q, p):
    """``0.5 |p|^2 + V(q)`` for batched ``q``, ``p``."""
    p = np.asarray(p, dtype=float)
    return 0.5 * np.sum(p * p, axis=-1) + potential.value(q)


class ZeroPotential(Potential):
    def __init__(self, dim):
        self.dim = int(dim)

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return np.zeros(q.shape[:-1])

    def gradient(self, q):
        return np.zeros_like(np.asarray(q, dtype=float))

    def hessian(self, q):
        q = np.asarray(q, dtype=float)
        return np.zeros(q.shape + (self.dim,))


class HarmonicPotential(Potential):
    """``0.5 * sum(omega_j^2 q_j^2)``."""

    def __init__(self, dim, omega=1.0):
        self.dim = int(dim)
        self.omega = np.broadcast_to(np.asarray(omega, dtype=float), (self.dim,)).copy()

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return 0.5 * np.sum((self.omega * q) ** 2, axis=-1)

    def gradient(self, q):
        return self.omega**2 * np.asarray(q, dtype=float)

    def hessian(self, q):
        q = np.asarray(q, dtype=float)
        return np.broadcast_to(np.diag(self.omega**2), q.shape + (self.dim,)).copy()


class PendulumPotential(Potential):
    """Uncoupled pendulums ``sum(1 - cos q_j)``."""

    def __init__(self, dim=1):
        self.dim = int(dim)

    def value(self, q):
        return np.sum(1.0 - np.cos(q), axis=-1)

    def gradient(self, q):
        return np.sin(np.asarray(q, dtype=float))

    def hessian(self, q):
        c = np.cos(np.asarray(q, dtype=float))
        return c[..., :, None] * np.eye(self.dim)


class CosinePotential(Potential):
    """``amplitude * cos(k . q)``: depends on one combination, hence integrable."""

    def __init__(self, k, amplitude=1.0):
        self.k = np.asarray(k, dtype=float)
        self.dim = self.k.size
        self.amplitude = float(amplitude)

    def value(self, q):
        return self.amplitude * np.cos(np.asarray(q, dtype=float) @ self.k)

    def gradient(self, q):
        s = np.sin(np.asarray(q, dtype=float) @ self.k)
        return -self.amplitude * s[..., None] * self.k

    def hessian(self, q):
        c = np.cos(np.asarray(q, dtype=float) @ self.k)
        return -self.amplitude * c[..., None, None] * np.outer(self.k, self.k)
