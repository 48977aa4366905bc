"""Desk-scale survey of random trigonometric potentials.

For each degree ``L`` and trial a potential ``V^L`` is drawn, the torus is
split into the ``(2N)^d`` cubes of side ``pi / N`` and each cube is tested
for chaos (at least three Chaotic initial conditions) and for Diophantine
tori (at least one Regular one) on a fixed energy band.

All integrations run in the rescaled chart ``q = (cutoff / L) x`` where the
potential varies on unit scales: momenta and energies are unchanged, time
is stretched by ``L / cutoff``, so one fixed step and horizon serve every
``L``.  Initial conditions sit on a cell-centred lattice of fixed spacing in
``x``; each lattice node owns a random stream keyed by its global index,
so nested regions see identical samples.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .chaos import CHAOTIC, REGULAR, UNDETERMINED
from .dynamics import PhaseState, integrate
from .ensemble import RescaledPotential, TorusPotential, sample_torus_potential
from .rng import as_seed
from .tori import Budget, DiophantineParams, Region, analyze_orbits, count_clusters, node_conditions, wilson_interval

__all__ = [
    "DEFAULT_BAND",
    "GridSpec",
    "SurveyConfig",
    "SurveyResult",
    "run_survey",
    "survey_trial",
    "expected_counts",
    "RescalingReport",
    "rescaling_check",
]

DEFAULT_BAND = (1.5, 3.0)
CHAOS_MIN = 3


@dataclass(frozen=True)
class GridSpec:
    """The ``(2N)^d`` open cubes of side ``pi / N`` tiling ``[0, 2 pi)^d``."""

    N: int
    d: int

    def __post_init__(self):
        if self.N < 1 or self.d < 1:
            raise ValueError("need N >= 1 and d >= 1")

    @property
    def side(self):
        return math.pi / self.N

    @property
    def per_axis(self):
        return 2 * self.N

    @property
    def cubes(self):
        return list(np.ndindex(*(self.per_axis,) * self.d))

    def bounds(self, k):
        lo = np.asarray(k, dtype=float) * self.side
        return lo, lo + self.side

    def volume(self, k):
        lo, hi = self.bounds(k)
        return float(np.prod(hi - lo))


@dataclass(frozen=True)
class SurveyConfig:
    d: int = 2
    N: int = 1
    L_list: tuple = (3, 6, 12)
    trials: int = 20
    band: tuple = DEFAULT_BAND
    budget: Budget = Budget()
    seed: int = 0
    cutoff: float = math.pi
    node_density: float = 7.0 / 6.0
    chaos_min: int = CHAOS_MIN
    drift_tol: float = 1e-5
    dio: DiophantineParams = DiophantineParams()
    # momentum box half-width; None means sqrt(2 h2)
    p_max: float | None = None

    def __post_init__(self):
        L = tuple(int(x) for x in self.L_list)
        object.__setattr__(self, "L_list", L)
        object.__setattr__(self, "band", tuple(float(x) for x in self.band))
        if self.d < 1 or self.N < 1:
            raise ValueError("need d >= 1 and N >= 1")
        if not L or any(x < 1 for x in L) or any(b <= a for a, b in zip(L, L[1:])):
            raise ValueError("L_list must be positive and strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if not self.band[0] < self.band[1]:
            raise ValueError("band must satisfy h1 < h2")
        if self.p_max is None and self.band[1] <= 0:
            raise ValueError("the default momentum box sqrt(2 h2) needs h2 > 0; set p_max")
        if self.p_max is not None and self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if self.cutoff <= 0 or self.node_density <= 0:
            raise ValueError("cutoff and node_density must be positive")

    def nodes_per_axis(self, L):
        """Lattice nodes per cube edge: fixed spacing in ``x`` capped by the budget."""
        side_x = (math.pi / self.N) * L / self.cutoff
        cap = int(math.floor(self.budget.n_traj ** (1.0 / self.d) + 1e-9))
        return max(1, min(int(math.ceil(self.node_density * side_x - 1e-9)), cap))

    def to_dict(self):
        out = asdict(self)
        out["L_list"] = list(self.L_list)
        out["band"] = list(self.band)
        return out

    @property
    def momentum_bound(self):
        return float(self.p_max) if self.p_max is not None else math.sqrt(2.0 * self.band[1])


def _cube_region(grid, k, L, cutoff, p_max):
    lo, hi = grid.bounds(k)
    s = L / cutoff
    return Region(lo * s, hi * s, p_max)


def survey_trial(cfg: SurveyConfig, L, trial, potential=None):
    """Classify every cube for one draw of ``V^L``; returns a JSON-able record."""
    t0 = time.perf_counter()
    seed = as_seed(cfg.seed)
    pot = potential if potential is not None else sample_torus_potential(cfg.d, L, seed.child(0, L, trial))
    scale = cfg.cutoff / L
    xpot = RescaledPotential(pot, np.zeros(cfg.d), scale)
    grid = GridSpec(cfg.N, cfg.d)
    g = cfg.nodes_per_axis(L)
    node_seed = seed.child(1, L, trial)
    band = cfg.band
    vol_q = scale**cfg.d
    cubes = []
    big = np.empty((g * grid.per_axis,) * cfg.d, dtype=object)
    tori_volume = 0.0
    local = np.stack(np.meshgrid(*[np.arange(g)] * cfg.d, indexing="ij"), axis=-1).reshape(-1, cfg.d)
    per_cube = []
    for k in grid.cubes:
        reg = _cube_region(grid, k, L, cfg.cutoff, cfg.momentum_bound)
        gidx = local + np.asarray(k) * g
        nodes = reg.q_lo + (local + 0.5) * (reg.q_hi - reg.q_lo) / g
        P, valid, acc = node_conditions(xpot, nodes, band, reg.p_max, node_seed, [tuple(i) for i in gidx],
                                        cfg.budget.tries)
        per_cube.append((k, reg, nodes, P, valid, acc))
    # one batch for the whole torus keeps the per-step overhead low
    Q = np.concatenate([c[2][c[4]] for c in per_cube])
    Pm = np.concatenate([c[3][c[4]] for c in per_cube])
    all_labels = np.empty(0, dtype=object)
    if Q.shape[0]:
        all_labels = analyze_orbits(Q, Pm, xpot, cfg.budget, dio=cfg.dio, drift_tol=cfg.drift_tol,
                                    period=2 * math.pi / scale).label
    pos = 0
    for k, reg, nodes, P, valid, acc in per_cube:
        labels = np.full(len(nodes), UNDETERMINED, dtype=object)
        nv = int(valid.sum())
        labels[valid] = all_labels[pos:pos + nv]
        pos += nv
        sl = tuple(slice(int(c) * g, (int(c) + 1) * g) for c in k)
        big[sl] = labels.reshape((g,) * cfg.d)
        n_valid, n_reg, n_ch = nv, int(np.sum(labels == REGULAR)), int(np.sum(labels == CHAOTIC))
        band_vol = acc * reg.box_volume(band) * vol_q
        vol = (n_reg / n_valid) * band_vol if n_valid else 0.0
        tori_volume += vol
        cubes.append({
            "cube": [int(c) for c in k],
            "n_nodes": int(len(nodes)),
            "n_valid": n_valid,
            "n_chaotic": n_ch,
            "n_regular": n_reg,
            "chaos_found": bool(n_ch >= cfg.chaos_min),
            "tori_found": bool(n_reg >= 1),
            "status": "ok" if n_valid else UNDETERMINED,
            "band_volume": band_vol,
            "tori_volume": vol,
        })
    chaos_count = count_clusters(big == CHAOTIC, periodic=True)
    return {
        "L": int(L),
        "trial": int(trial),
        "nodes_per_axis": g,
        "cubes": cubes,
        "success": all(c["chaos_found"] and c["tori_found"] for c in cubes),
        "chaos_count": int(chaos_count),
        "tori_volume": float(tori_volume),
        "runtime": time.perf_counter() - t0,
    }


@dataclass
class SurveyResult:
    config: SurveyConfig
    records: list
    runtime: float = field(default=0.0, compare=False)

    def by_L(self, L):
        return [r for r in self.records if r["L"] == L]

    def summary(self):
        rows = []
        for L in self.config.L_list:
            rec = self.by_L(L)
            k, n = sum(r["success"] for r in rec), len(rec)
            lo, hi = wilson_interval(k, n)
            rows.append({
                "L": L,
                "trials": n,
                "success_freq": k / n if n else 0.0,
                "ci_lo": lo,
                "ci_hi": hi,
                "mean_chaos_count": float(np.mean([r["chaos_count"] for r in rec])) if n else 0.0,
                "mean_tori_volume": float(np.mean([r["tori_volume"] for r in rec])) if n else 0.0,
            })
        return rows

    @property
    def success_freq(self):
        return {row["L"]: row["success_freq"] for row in self.summary()}

    def to_dict(self):
        """Deterministic content (runtimes excluded so equal seeds give equal output)."""
        recs = [{k: v for k, v in r.items() if k != "runtime"} for r in self.records]
        return {"master_seed": int(self.config.seed), "config": self.config.to_dict(), "summary": self.summary(),
                "trials": recs}

    def write(self, outdir):
        import os

        os.makedirs(outdir, exist_ok=True)
        files = []
        tdir = os.path.join(outdir, "trials")
        os.makedirs(tdir, exist_ok=True)
        for r in self.to_dict()["trials"]:
            path = os.path.join(tdir, f"L{r['L']:03d}_trial{r['trial']:03d}.json")
            with open(path, "w") as fh:
                json.dump(r, fh, indent=1, sort_keys=True)
            files.append(path)
        path = os.path.join(outdir, "survey_summary.csv")
        cols = ["L", "trials", "success_freq", "ci_lo", "ci_hi", "mean_chaos_count", "mean_tori_volume"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in self.summary():
                w.writerow([row[c] if isinstance(row[c], int) else repr(float(row[c])) for c in cols])
        files.append(path)
        path = os.path.join(outdir, "survey_result.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
        files.append(path)
        return files


def _run_task(args):
    cfg, L, trial, factory = args
    pot = factory(L, trial) if factory is not None else None
    return survey_trial(cfg, L, trial, pot)


def run_survey(d=2, N=1, L_list=(3, 6, 12), trials=20, energy_band=DEFAULT_BAND, budget: Budget = Budget(),
               seed=0, jobs=1, potential_factory=None, progress=None, **config_kw) -> SurveyResult:
    """Run every ``(L, trial)`` task and collect the records.

    ``potential_factory(L, trial)`` replaces the random draw (for controlled
    experiments).  With ``jobs > 1`` tasks go to a process pool; the record
    order and content do not depend on ``jobs``.
    """
    cfg = SurveyConfig(d, N, tuple(L_list), trials, tuple(energy_band), budget, int(as_seed(seed).master),
                       **config_kw)
    t0 = time.perf_counter()
    tasks = [(cfg, L, t, potential_factory) for L in cfg.L_list for t in range(cfg.trials)]
    records = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for rec in ex.map(_run_task, tasks):
                records.append(rec)
                if progress:
                    progress(rec)
    else:
        for task in tasks:
            rec = _run_task(task)
            records.append(rec)
            if progress:
                progress(rec)
    return SurveyResult(cfg, records, time.perf_counter() - t0)


def expected_counts(d=2, L_list=(6, 12), trials=10, energy_band=DEFAULT_BAND, seed=0, result=None, **kw):
    """Per-``L`` mean chaos-cluster count (also divided by ``L^d``) and mean torus volume over the torus."""
    res = result if result is not None else run_survey(d, 1, L_list, trials, energy_band, seed=seed, **kw)
    out = {}
    for row in res.summary():
        L = row["L"]
        out[L] = {"mean_chaos_count": row["mean_chaos_count"],
                  "count_per_Ld": row["mean_chaos_count"] / L**res.config.d,
                  "mean_tori_volume": row["mean_tori_volume"]}
    return out


@dataclass
class RescalingReport:
    deviation: float
    energy_identity: float
    steps: int
    integration_error: float


def rescaling_check(pot: TorusPotential, q0, cutoff, state0: PhaseState, t_end, h, scheme="leapfrog",
                    reference_h=None) -> RescalingReport:
    """Compare the flow of ``V^L`` with the mapped flow of ``V^{L,q0}``.

    ``state0`` holds ``(x_0, P_0)``.  The ``q`` side starts at
    ``(q0 + (cutoff/L) x_0, P_0)`` with step ``h``; the ``x`` side uses
    ``h (L / cutoff)``.  ``deviation`` is the sup over matched sample times of
    the phase-space distance after mapping, ``energy_identity`` the sup of
    ``|H_x - H_q|`` along matched times.  With ``reference_h``,
    ``integration_error`` is the ``q`` side's distance from an order-4 run
    at that step (NaN otherwise).
    """
    L = pot.degree
    s = cutoff / L
    q0 = np.asarray(q0, dtype=float).reshape(pot.dim)
    xpot = RescaledPotential(pot, q0, s)
    x0 = np.asarray(state0.q, dtype=float)
    P0 = np.asarray(state0.p, dtype=float)
    n = int(round(t_end / h))
    tq = integrate(PhaseState(q0 + s * x0, P0), n * h, h, pot, scheme)
    tx = integrate(PhaseState(x0, P0), n * h / s, h / s, xpot, scheme)
    m = min(len(tq.t), len(tx.t))
    dq = tq.q[:m] - (q0 + s * tx.q[:m])
    dp = tq.p[:m] - tx.p[:m]
    dev = float(np.max(np.sqrt(np.sum(dq**2, axis=1) + np.sum(dp**2, axis=1))))
    en = float(np.max(np.abs(tq.energy[:m] - tx.energy[:m])))
    if reference_h is None:
        return RescalingReport(dev, en, n, float("nan"))
    ref_h = reference_h
    ref = integrate(PhaseState(q0 + s * x0, P0), n * h, ref_h, pot, "order4", record_every=int(round(h / ref_h)))
    k = min(m, len(ref.t))
    err = float(np.max(np.sqrt(np.sum((tq.q[:k] - ref.q[:k]) ** 2, axis=1) + np.sum((tq.p[:k] - ref.p[:k]) ** 2, axis=1))))
    return RescalingReport(dev, en, n, err)
