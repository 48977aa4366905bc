"""Invariant-torus detection: frequency analysis, Diophantine checks, volume estimates.

An orbit counts as lying on a Diophantine torus when three independent
tests agree:

* its tangent-flow indicators say Regular (:mod:`hamiltonia.chaos`);
* a refined Fourier analysis finds one clean fundamental line per degree
  of freedom whose frequency is stable between the two halves of the
  orbit (``drift < drift_tol``) and carries a non-negligible share of the
  signal power (a stand-in for a bounded embedding norm);
* the frequency vector passes ``|omega . k| >= gamma |k|^-(d-1+tau)`` for
  every ``0 < |k|_1 <= K``.

Frequency analysis windows the signal with a Hann taper, takes the FFT
peak, then solves ``d|phi|^2 / d omega = 0`` inside the main lobe.
Librating coordinates use ``(q - <q>) - i p``; coordinates that drift by
more than one period use ``exp(2 pi i q / period)``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize
from scipy.stats import norm

from .chaos import CHAOTIC, REGULAR, UNDETERMINED, Thresholds, classify, tangent_indicators
from .dynamics import PhaseState, integrate
from .potential import hamiltonian
from .rng import as_seed, generator

__all__ = [
    "PeakNotFound",
    "EmptyBand",
    "FrequencyVector",
    "frequency_analysis",
    "frequencies_from_samples",
    "DiophantineParams",
    "DiophantineResult",
    "diophantine_check",
    "diophantine_margins",
    "Region",
    "Budget",
    "OrbitAnalysis",
    "analyze_orbits",
    "ToriEstimate",
    "torus_fraction",
    "wilson_interval",
    "count_clusters",
    "StructureCount",
    "count_structures",
    "write_samples_csv",
]


class PeakNotFound(RuntimeError):
    """No dominant spectral line: the orbit looks broadband."""


class EmptyBand(RuntimeError):
    """Rejection sampling of the energy band accepted almost nothing."""


@dataclass
class FrequencyVector:
    omega: np.ndarray
    amplitudes: np.ndarray
    residual: float
    drift: float
    kinds: tuple = ()

    def is_candidate(self, drift_tol=1e-5):
        return bool(np.isfinite(self.drift) and self.drift < drift_tol)


# ---------------------------------------------------------------------------
# refined Fourier analysis
# ---------------------------------------------------------------------------


def _signals(Q, P, period):
    """Complex signals of shape ``(B, d, n)`` from samples ``(n, B, d)``."""
    Q = np.moveaxis(np.asarray(Q, dtype=float), 0, -1)
    P = np.moveaxis(np.asarray(P, dtype=float), 0, -1)
    rot = np.abs(Q[..., -1] - Q[..., 0]) > period
    lib = (Q - Q.mean(axis=-1, keepdims=True)) - 1j * P
    z = np.where(rot[..., None], np.exp(2j * np.pi * Q / period), lib)
    return z, rot


def _peak(z, dt):
    """Frequency, amplitude and power fraction of the dominant line of ``z``."""
    n = z.size
    w = 1.0 - np.cos(2 * np.pi * np.arange(n) / n)
    zw = z * w
    pad = 4
    F = np.fft.fft(zw, pad * n)
    k = int(np.argmax(np.abs(F)))
    freqs = 2 * np.pi * np.fft.fftfreq(pad * n, dt)
    bin_w = 2 * np.pi / (pad * n * dt)
    t = dt * np.arange(n)

    def dpow(om):
        e = np.exp(-1j * om * t)
        phi = zw @ e
        dphi = (-1j * t * zw) @ e
        return 2.0 * (np.conj(phi) * dphi).real

    lo, hi = freqs[k] - 1.5 * bin_w, freqs[k] + 1.5 * bin_w
    try:
        om = optimize.brentq(dpow, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except ValueError:
        om = freqs[k]
    phi = zw @ np.exp(-1j * om * t)
    amp = phi / w.sum()
    power = np.mean(np.abs(z) ** 2)
    frac = float(abs(amp) ** 2 / power) if power > 0 else 0.0
    return om, amp, frac


def frequencies_from_samples(Q, P, dt, period=2 * np.pi, freq_scale=1.0, min_power=1e-2):
    """Batched frequency analysis of orbits sampled as ``(n, B, d)`` arrays.

    Returns ``(omega, drift, fraction, found)`` with ``omega`` and
    ``drift`` multiplied by ``freq_scale``; ``found`` is False where some
    coordinate has no line above ``min_power``.
    """
    z, _ = _signals(Q, P, period)
    B, d, n = z.shape
    h = n // 2
    omega = np.full((B, d), np.nan)
    drift = np.full(B, np.inf)
    frac = np.zeros((B, d))
    for b in range(B):
        diffs = []
        for j in range(d):
            om, _, fr = _peak(z[b, j], dt)
            o1, _, _ = _peak(z[b, j, :h], dt)
            o2, _, _ = _peak(z[b, j, h:2 * h], dt)
            omega[b, j], frac[b, j] = om, fr
            diffs.append(abs(o1 - o2))
        drift[b] = max(diffs)
    found = np.all(frac >= min_power, axis=1)
    return omega * freq_scale, drift * abs(freq_scale), frac, found


def frequency_analysis(traj, n_freq=None, period=2 * np.pi, freq_scale=1.0, min_power=1e-2):
    """Fundamental frequencies of one uniformly sampled trajectory.

    Raises :class:`PeakNotFound` when a coordinate has no dominant line.
    """
    Q, P = np.asarray(traj.q, dtype=float), np.asarray(traj.p, dtype=float)
    if Q.ndim != 2:
        raise ValueError("frequency_analysis takes a single orbit; use frequencies_from_samples for batches")
    if Q.shape[0] < 2**14:
        raise ValueError("at least 2^14 samples are needed")
    dt = float(traj.t[1] - traj.t[0])
    if not np.allclose(np.diff(traj.t), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("sampling must be uniform")
    d = Q.shape[1]
    n_freq = d if n_freq is None else int(n_freq)
    if not 1 <= n_freq <= d:
        raise ValueError("n_freq must lie between 1 and d")
    z, rot = _signals(Q[:, None, :], P[:, None, :], period)
    om, amps, fracs, diffs = [], [], [], []
    h = z.shape[-1] // 2
    for j in range(n_freq):
        o, a, fr = _peak(z[0, j], dt)
        if fr < min_power:
            raise PeakNotFound(f"coordinate {j + 1}: dominant line carries only {fr:.2e} of the power")
        o1, _, _ = _peak(z[0, j, :h], dt)
        o2, _, _ = _peak(z[0, j, h:2 * h], dt)
        om.append(o)
        amps.append(abs(a))
        fracs.append(fr)
        diffs.append(abs(o1 - o2))
    kinds = tuple("rotation" if r else "libration" for r in rot[0, :n_freq])
    return FrequencyVector(np.array(om) * freq_scale, np.array(amps), float(1.0 - min(fracs)),
                           float(max(diffs)) * abs(freq_scale), kinds)


# ---------------------------------------------------------------------------
# Diophantine condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiophantineParams:
    gamma: float = 0.01
    tau: float = 0.9
    K: int = 30

    def __post_init__(self):
        if self.gamma < 0.01:
            raise ValueError("gamma must be at least 0.01")
        if not 0.1 < self.tau < 1.0:
            raise ValueError("tau must lie in (0.1, 1.0)")
        if self.K < 1:
            raise ValueError("K must be positive")


@dataclass
class DiophantineResult:
    passed: bool
    margin: float
    worst_k: tuple


_KCACHE = {}


def _kvectors(d, K):
    """Integer vectors with ``0 < |k|_1 <= K``, one of each pair ``+/-k``."""
    key = (d, K)
    if key not in _KCACHE:
        rng = range(-K, K + 1)
        ks = [k for k in itertools.product(rng, repeat=d) if 0 < sum(map(abs, k)) <= K]
        ks = [k for k in ks if next(x for x in k if x != 0) > 0]
        _KCACHE[key] = np.array(ks, dtype=np.int64)
    return _KCACHE[key]


def diophantine_margins(omega, params: DiophantineParams):
    """Batched ``min_k |omega . k| |k|_1^(d-1+tau)`` and the minimising ``k``."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    d = omega.shape[1]
    ks = _kvectors(d, params.K)
    norms = np.abs(ks).sum(axis=1).astype(float) ** ((d - 1) + params.tau)
    m = np.abs(omega @ ks.T) * norms
    i = np.argmin(m, axis=1)
    return m[np.arange(len(i)), i], ks[i]


def diophantine_check(omega, params: DiophantineParams = DiophantineParams()) -> DiophantineResult:
    """Exhaustive check of the Diophantine inequality over ``0 < |k|_1 <= K``."""
    omega = np.asarray(omega, dtype=float).ravel()
    if not np.all(np.isfinite(omega)):
        return DiophantineResult(False, float("nan"), ())
    m, k = diophantine_margins(omega, params)
    return DiophantineResult(bool(m[0] >= params.gamma), float(m[0]), tuple(int(x) for x in k[0]))


# ---------------------------------------------------------------------------
# sampling and classification
# ---------------------------------------------------------------------------


@dataclass
class Region:
    """Phase-space box ``q_lo <= q <= q_hi``, ``|p_j| <= p_max``, optionally cut by ``predicate(q, p)``."""

    q_lo: np.ndarray
    q_hi: np.ndarray
    p_max: float | None = None
    predicate: object = field(default=None, repr=False)

    def __post_init__(self):
        self.q_lo = np.asarray(self.q_lo, dtype=float)
        self.q_hi = np.asarray(self.q_hi, dtype=float)
        if self.q_lo.shape != self.q_hi.shape or np.any(self.q_hi <= self.q_lo):
            raise ValueError("region needs q_lo < q_hi componentwise")

    @property
    def dim(self):
        return self.q_lo.size

    def momentum_bound(self, band):
        return float(self.p_max) if self.p_max is not None else math.sqrt(2.0 * band[1])

    def box_volume(self, band):
        return float(np.prod(self.q_hi - self.q_lo) * (2 * self.momentum_bound(band)) ** self.dim)


@dataclass(frozen=True)
class Budget:
    """Per-region work limits: trajectory count, horizon, step, sampling stride."""

    n_traj: int = 200
    t_total: float = 500.0
    h: float = 0.01
    record_every: int = 3
    n_samples: int = 2**14
    tries: int = 64
    chunk: int = 128
    scheme: str = "leapfrog"


@dataclass
class OrbitAnalysis:
    ftle: np.ndarray
    megno: np.ndarray
    chaos_label: np.ndarray
    omega: np.ndarray
    drift: np.ndarray
    power: np.ndarray
    margin: np.ndarray
    label: np.ndarray

    @property
    def torus(self):
        return self.label == REGULAR


def analyze_orbits(q, p, potential, budget: Budget = Budget(), thresholds=None,
                   dio: DiophantineParams = DiophantineParams(), drift_tol=1e-5, min_power=1e-2,
                   period=2 * np.pi, freq_scale=1.0) -> OrbitAnalysis:
    """Chaos indicators plus torus tests for a batch of initial conditions.

    A first pass computes the indicators for the whole batch; a second pass
    re-integrates only the orbits the indicators call Regular, recording
    them for frequency analysis (``budget.chunk`` orbits at a time).  Final
    labels: Regular only for orbits that are Regular by the indicators and
    pass the frequency and Diophantine tests; Chaotic as labelled by the
    indicators; everything else Undetermined.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p = np.atleast_2d(np.asarray(p, dtype=float))
    B, d = q.shape
    th = thresholds or Thresholds(budget.t_total)
    ind = tangent_indicators(q, p, potential, budget.t_total, budget.h, budget.scheme)
    f, m = ind.ftle, ind.megno
    chaos_label = classify(f, m, th, ind.escaped)
    om = np.full((B, d), np.nan)
    dr = np.full(B, np.inf)
    pw = np.zeros(B)
    cand = np.flatnonzero(chaos_label == REGULAR)
    n_steps = budget.n_samples * budget.record_every
    if n_steps * budget.h > budget.t_total * (1 + 1e-12):
        raise ValueError("budget horizon too short for n_samples at this stride")
    for s in range(0, cand.size, budget.chunk):
        idx = cand[s:s + budget.chunk]
        tr = integrate(PhaseState(q[idx], p[idx]), n_steps * budget.h, budget.h, potential, budget.scheme,
                       budget.record_every)
        n = budget.n_samples
        o, dd, fr, found = frequencies_from_samples(tr.q[:n], tr.p[:n], budget.h * budget.record_every,
                                                    period, freq_scale, min_power)
        om[idx], dr[idx], pw[idx] = o, np.where(found, dd, np.inf), fr.min(axis=1)
    margin = np.full(B, np.nan)
    ok = np.all(np.isfinite(om), axis=1)
    if ok.any():
        margin[ok] = diophantine_margins(om[ok], dio)[0]
    torus = (chaos_label == REGULAR) & (dr < drift_tol) & (pw >= min_power) & (margin >= dio.gamma)
    label = np.where(torus, REGULAR, np.where(chaos_label == CHAOTIC, CHAOTIC, UNDETERMINED)).astype(object)
    return OrbitAnalysis(f, m, chaos_label, om, dr, pw, margin, label)


def wilson_interval(k, n, conf=0.95):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + conf / 2)
    ph = k / n
    den = 1 + z * z / n
    c = (ph + z * z / (2 * n)) / den
    hw = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, c - hw), min(1.0, c + hw)


def _in_band(potential, q, p, band, region):
    H = hamiltonian(potential, q, p)
    ok = (H > band[0]) & (H < band[1])
    if region.predicate is not None:
        ok &= np.asarray(region.predicate(q, p), dtype=bool)
    return ok, H


def _rejection_sample(potential, region, band, n, rng, max_draws=None):
    d = region.dim
    pm = region.momentum_bound(band)
    max_draws = max_draws or max(20000, 200 * n)
    got_q, got_p = [], []
    drawn = accepted = 0
    while accepted < n and drawn < max_draws:
        m = min(max(4 * (n - accepted), 1000), max_draws - drawn)
        q = region.q_lo + (region.q_hi - region.q_lo) * rng.random((m, d))
        p = pm * (2 * rng.random((m, d)) - 1)
        ok, _ = _in_band(potential, q, p, band, region)
        drawn += m
        accepted += int(ok.sum())
        got_q.append(q[ok])
        got_p.append(p[ok])
        if drawn >= 1000 and accepted / drawn < 1e-3:
            raise EmptyBand(f"acceptance {accepted / drawn:.2e} below 1e-3 for band {band}")
    return np.concatenate(got_q)[:n], np.concatenate(got_p)[:n], accepted / drawn


@dataclass
class ToriEstimate:
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray
    analysis: OrbitAnalysis
    fraction: float
    ci: tuple
    acceptance: float
    band_volume: float
    regular_components: int

    @property
    def labels(self):
        return self.analysis.label

    @property
    def tori_volume(self):
        return self.fraction * self.band_volume

    def to_dict(self):
        a = self.analysis
        return {
            "n_samples": int(self.q.shape[0]),
            "fraction": self.fraction,
            "ci": list(self.ci),
            "acceptance": self.acceptance,
            "band_volume": self.band_volume,
            "tori_volume": self.tori_volume,
            "regular_components": self.regular_components,
            "label_counts": {k: int(np.sum(a.label == k)) for k in (REGULAR, CHAOTIC, UNDETERMINED)},
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def torus_fraction(potential, region: Region, energy_band, n_samples, seed, budget: Budget = Budget(),
                   **analysis_kw) -> ToriEstimate:
    """Share of the band volume of ``region`` filled by detected Diophantine tori.

    Initial conditions are drawn uniformly from the box and kept when
    ``h1 < H < h2`` (and the region predicate holds).  Regular components
    are counted as connected clusters of regular samples on a ``3^(2d)``
    neighbourhood of a cell grid in phase space.
    """
    h1, h2 = energy_band
    if not h1 < h2:
        raise ValueError("energy band must satisfy h1 < h2")
    rng = generator(as_seed(seed))
    q, p, acc = _rejection_sample(potential, region, energy_band, n_samples, rng)
    if q.shape[0] == 0:
        raise EmptyBand("no sample landed in the band")
    a = analyze_orbits(q, p, potential, budget, **analysis_kw)
    k = int(np.sum(a.label == REGULAR))
    n = q.shape[0]
    comps = _phase_space_components(q, p, a.label == REGULAR, region, energy_band)
    return ToriEstimate(q, p, hamiltonian(potential, q, p), a, k / n, wilson_interval(k, n), acc,
                        acc * region.box_volume(energy_band), comps)


def _phase_space_components(q, p, mask, region, band, cells=6):
    if not mask.any():
        return 0
    z = np.concatenate([q, p], axis=1)
    pm = region.momentum_bound(band)
    lo = np.concatenate([region.q_lo, -pm * np.ones(region.dim)])
    hi = np.concatenate([region.q_hi, pm * np.ones(region.dim)])
    idx = np.clip(((z - lo) / (hi - lo) * cells).astype(int), 0, cells - 1)
    grid = np.zeros((cells,) * z.shape[1], dtype=bool)
    grid[tuple(idx[mask].T)] = True
    return count_clusters(grid)


def count_clusters(mask, periodic=False):
    """Connected components of ``mask`` with full ``3^d`` connectivity, optionally on a periodic grid."""
    mask = np.asarray(mask, dtype=bool)
    d = mask.ndim
    structure = np.ones((3,) * d, dtype=bool)
    if not periodic:
        return int(ndimage.label(mask, structure)[1])
    padded = np.pad(mask, 1, mode="wrap")
    lab, n = ndimage.label(padded, structure)
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    inner = tuple(slice(1, -1) for _ in range(d))
    core = lab[inner]
    shape = mask.shape
    # each padded cell is a copy of the cell at (index - 1) mod shape
    for idx in np.argwhere(padded):
        if np.all((idx >= 1) & (idx <= np.array(shape))):
            continue
        orig = tuple((idx - 1) % np.array(shape))
        a, b = find(lab[tuple(idx)]), find(core[orig])
        if a != b:
            parent[a] = b
    roots = {find(x) for x in np.unique(core[core > 0])}
    return len(roots)


@dataclass
class StructureCount:
    chaos_count: int
    tori_volume: float
    n_valid: int
    n_chaotic: int
    n_regular: int
    band_volume: float
    labels: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)
    analysis: OrbitAnalysis | None = field(repr=False, default=None)


def node_grid(region: Region, g):
    """Cell-centred lattice with ``g`` nodes per axis; returns points of shape ``(g,)*d + (d,)``."""
    axes = [region.q_lo[j] + (region.q_hi[j] - region.q_lo[j]) * (np.arange(g) + 0.5) / g for j in range(region.dim)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def node_conditions(potential, nodes, band, p_max, seed, ids=None, tries=64, predicate=None):
    """One band initial condition per node by momentum rejection sampling.

    Node ``i`` draws from the stream ``seed.child(*ids[i])`` so the sample at
    a node does not depend on which other nodes are present.  Returns
    ``(p, valid, acceptance)``.
    """
    nodes = np.asarray(nodes, dtype=float)
    N, d = nodes.shape
    seed = as_seed(seed)
    ids = [(i,) for i in range(N)] if ids is None else ids
    P = np.zeros((N, d))
    valid = np.zeros(N, dtype=bool)
    draws = np.zeros((tries, N, d))
    for i in range(N):
        draws[:, i] = p_max * (2 * generator(seed.child(*map(int, ids[i]))).random((tries, d)) - 1)
    V = potential.value(nodes)
    H = 0.5 * np.sum(draws**2, axis=-1) + V
    ok = (H > band[0]) & (H < band[1])
    if predicate is not None:
        ok &= np.asarray([predicate(nodes, draws[t]) for t in range(tries)], dtype=bool)
    first = np.argmax(ok, axis=0)
    valid = ok.any(axis=0)
    P[valid] = draws[first[valid], np.flatnonzero(valid)]
    return P, valid, float(ok.mean())


def count_structures(potential, region: Region, energy_band, budget: Budget = Budget(), seed=0, g=None,
                     periodic=False, volume_scale=1.0, global_ids=False, **analysis_kw) -> StructureCount:
    """Chaos-cluster count and torus volume on a node grid covering ``region``.

    ``g`` nodes per axis (default: largest with ``g^d <= budget.n_traj``);
    one initial condition per node.  ``chaos_count`` is the number of
    ``3^d``-connected clusters of Chaotic nodes; ``tori_volume`` is the
    regular share of valid nodes times the band volume, multiplied by
    ``volume_scale`` (for chart changes).  With ``global_ids`` node streams
    are keyed by ``floor(centre / spacing)``, so two regions with the same
    node spacing draw identical initial conditions at shared nodes.
    """
    d = region.dim
    if g is None:
        g = max(1, int(math.floor(budget.n_traj ** (1.0 / d) + 1e-9)))
    if g**d > budget.n_traj:
        raise ValueError("grid exceeds the trajectory budget")
    grid = node_grid(region, g)
    nodes = grid.reshape(-1, d)
    if global_ids:
        ids = [tuple(ix) for ix in np.floor(nodes * g / (region.q_hi - region.q_lo)).astype(int)]
    else:
        ids = [tuple(ix) for ix in np.ndindex(*(g,) * d)]
    pm = region.momentum_bound(energy_band)
    P, valid, acc = node_conditions(potential, nodes, energy_band, pm, seed, ids, budget.tries, region.predicate)
    labels = np.full(nodes.shape[0], UNDETERMINED, dtype=object)
    a = None
    if valid.any():
        a = analyze_orbits(nodes[valid], P[valid], potential, budget, **analysis_kw)
        labels[valid] = a.label
    lab_grid = labels.reshape((g,) * d)
    n_valid = int(valid.sum())
    n_reg = int(np.sum(labels == REGULAR))
    n_ch = int(np.sum(labels == CHAOTIC))
    band_vol = acc * region.box_volume(energy_band) * volume_scale
    frac = n_reg / n_valid if n_valid else 0.0
    return StructureCount(count_clusters(lab_grid == CHAOTIC, periodic), frac * band_vol, n_valid, n_ch, n_reg,
                          band_vol, lab_grid, valid.reshape((g,) * d), a)


def write_samples_csv(path, est: ToriEstimate):
    d = est.q.shape[1]
    a = est.analysis
    header = ([f"q_{j + 1}" for j in range(d)] + [f"p_{j + 1}" for j in range(d)] + ["H"]
              + [f"omega_{j + 1}" for j in range(d)] + ["label", "margin"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(est.q.shape[0]):
            w.writerow([repr(float(v)) for v in est.q[i]] + [repr(float(v)) for v in est.p[i]]
                       + [repr(float(est.energy[i]))] + [repr(float(v)) for v in a.omega[i]]
                       + [a.label[i], repr(float(a.margin[i]))])
