"""Command-line entry point.

Every subcommand resolves its settings as built-in defaults, then keys from
``--config`` (JSON or YAML; a run manifest also works), then explicit flags.
Outputs go to ``--output-dir`` together with ``manifest.json``, which records
the resolved configuration so that ``<subcommand> --config manifest.json``
rebuilds the same files.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 64 unknown
subcommand.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .rng import ALGORITHM

log = logging.getLogger("hamiltonia")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2, 64

SUBCOMMANDS = ("sample", "melnikov", "integrate", "chaos", "tori", "survey", "covariance")


class ValidationError(Exception):
    pass


class _UsageError(Exception):
    def __init__(self, message, unknown_command=False):
        super().__init__(message)
        self.unknown_command = unknown_command


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message, "invalid choice" in message and "subcommand" in message)


# ---------------------------------------------------------------------------
# defaults and validation per subcommand
# ---------------------------------------------------------------------------

DEFAULTS = {
    "sample": {"kind": "torus", "d": 2, "L": 6, "cutoff": math.pi, "N": None},
    "melnikov": {"I0": 0.5, "theta": 1.0, "grid": 32, "sign": 1, "T": 40.0},
    "integrate": {"system": "model", "d": 2, "eta": 0.05, "L": 6, "potential": None, "q": [0.0, 3.0],
                  "p": [1.0, 0.5], "t_end": 100.0, "h": 0.01, "scheme": "order4", "record_every": 10},
    "chaos": {"system": "model", "d": 2, "eta": 0.05, "L": 6, "potential": None, "band": [2.2, 2.8],
              "n_samples": 64, "t_total": 1000.0, "h": 0.01, "crossings": False, "arclen_max": 8.5},
    "tori": {"system": "model", "d": 2, "eta": 0.05, "L": 6, "potential": None, "band": [2.2, 2.8],
             "n_samples": 128, "t_total": 1000.0, "h": 0.01, "radius": 5.0},
    "survey": {"d": 2, "N": 1, "L_list": [3, 6, 12], "trials": 20, "band": [1.5, 3.0], "cutoff": math.pi,
               "p_max": None, "budget": {"n_traj": 200, "t_total": 500.0, "h": 0.01, "record_every": 3}},
    "covariance": {"d": 1, "L": 10, "cutoff": math.pi, "extent": 2.0, "points": 41},
}

SYSTEMS = ("model", "harmonic", "pendulum", "zero", "torus")


def _check(cond, msg):
    if not cond:
        raise ValidationError(msg)


def _validate(cmd, c):
    pos_int = lambda k, lo=1: _check(isinstance(c[k], int) and c[k] >= lo, f"{k} must be an integer >= {lo}")
    pos = lambda k: _check(float(c[k]) > 0, f"{k} must be positive")
    if "d" in c:
        pos_int("d")
        _check(c["d"] <= 6, "d must be at most 6")
    if "system" in c:
        _check(c["system"] in SYSTEMS, f"system must be one of {', '.join(SYSTEMS)}")
        if c["system"] == "model":
            _check(c["d"] >= 2, "the model needs d >= 2")
            _check(c["eta"] >= 0, "eta must be non-negative")
    if "band" in c:
        b = c["band"]
        _check(len(b) == 2 and b[0] < b[1], "band must be two numbers h1 < h2")
    if cmd == "sample":
        _check(c["kind"] in ("torus", "field"), "kind must be torus or field")
        pos_int("L")
        pos("cutoff")
        if c["N"] is not None:
            pos_int("N")
    elif cmd == "melnikov":
        _check(0 < c["I0"] <= 100, "I0 must lie in (0, 100]")
        pos_int("grid")
        _check(c["sign"] in (1, -1), "sign must be +1 or -1")
        _check(c["T"] >= 10, "T must be at least 10")
    elif cmd == "integrate":
        _check(len(c["q"]) == c["d"] and len(c["p"]) == c["d"], "q and p need d components")
        pos("t_end")
        pos("h")
        _check(c["h"] <= c["t_end"], "h must not exceed t_end")
        _check(c["scheme"] in ("leapfrog", "order4"), "scheme must be leapfrog or order4")
        pos_int("record_every")
    elif cmd in ("chaos", "tori"):
        pos_int("n_samples")
        pos("t_total")
        pos("h")
        _check(c["t_total"] / c["h"] >= 100, "t_total must cover at least 100 steps")
        if cmd == "tori":
            pos("radius")
            _check(c["t_total"] / c["h"] >= 3 * 2**14, "t_total / h must give 2^14 samples at stride 3")
        if cmd == "chaos" and c["crossings"]:
            _check(c["system"] == "model" and c["d"] == 2, "crossings are available for the d = 2 model")
    elif cmd == "survey":
        _check(isinstance(c["N"], int) and c["N"] >= 1, "N must be a positive integer")
        _check(all(isinstance(x, int) and x >= 1 for x in c["L_list"]), "L_list must hold positive integers")
        _check(all(b > a for a, b in zip(c["L_list"], c["L_list"][1:])), "L_list must be strictly increasing")
        pos_int("trials")
        pos("cutoff")
        _check(c["p_max"] is None or c["p_max"] > 0, "p_max must be positive")
        _check(c["p_max"] is not None or c["band"][1] > 0, "the default momentum box needs h2 > 0; set p_max")
        bud = c["budget"]
        _check(isinstance(bud, dict), "budget must be a mapping")
        unknown = set(bud) - {"n_traj", "t_total", "h", "record_every", "n_samples", "tries", "chunk", "scheme"}
        _check(not unknown, f"unknown budget keys: {sorted(unknown)}")
    elif cmd == "covariance":
        pos_int("L")
        pos("cutoff")
        pos("extent")
        pos_int("points", 2)
    if "L" in c and c.get("system") == "torus":
        pos_int("L")


def _load_config(path):
    if not os.path.isfile(path):
        raise ValidationError(f"config file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    try:
        if path.endswith((".yaml", ".yml")):
            import yaml

            obj = yaml.safe_load(text)
        else:
            obj = json.loads(text)
    except Exception as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValidationError(f"config {path} must be a mapping")
    if "subcommand" in obj and "config" in obj:
        seed = obj.get("seed")
        obj = dict(obj["config"])
        if seed is not None:
            obj["seed"] = seed
    return obj


def _resolve(cmd, args):
    cfg = json.loads(json.dumps(DEFAULTS[cmd]))
    extra = {}
    if args.config:
        file_cfg = _load_config(args.config)
        for k, v in file_cfg.items():
            if k in ("seed", "output_dir", "jobs"):
                extra[k] = v
            elif k == "budget" and isinstance(v, dict) and "budget" in cfg:
                cfg["budget"].update(v)
            elif k in cfg:
                cfg[k] = v
            else:
                raise ValidationError(f"unknown config key {k!r} for {cmd}")
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    for k in ("n_traj", "t_total", "h", "record_every"):
        v = getattr(args, f"budget_{k}", None)
        if v is not None:
            cfg["budget"][k] = v
    seed = args.seed if args.seed is not None else extra.get("seed")
    if seed is None:
        from .rng import default_master_seed

        seed = default_master_seed(0)
    out = args.output_dir or extra.get("output_dir") or "hamiltonia_out"
    jobs = args.jobs if args.jobs is not None else int(extra.get("jobs", 1))
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"seed must be an integer, got {seed!r}") from exc
    if not 0 <= seed < 2**64:
        raise ValidationError("seed must lie in [0, 2^64)")
    if jobs < 1:
        raise ValidationError("jobs must be positive")
    for k in ("d", "L", "N", "grid", "trials", "n_samples", "record_every", "points", "sign"):
        if k in cfg and isinstance(cfg[k], float) and cfg[k].is_integer():
            cfg[k] = int(cfg[k])
    if "L_list" in cfg:
        cfg["L_list"] = [int(x) if isinstance(x, float) and x.is_integer() else x for x in cfg["L_list"]]
    _validate(cmd, cfg)
    return cfg, seed, out, jobs


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _build_potential(c, seed):
    from .ensemble import load_json, sample_torus_potential
    from .model import ModelParams, ModelPotential
    from .potential import HarmonicPotential, PendulumPotential, ZeroPotential

    s = c["system"]
    if s == "model":
        return ModelPotential(ModelParams(c["d"], c["eta"]))
    if s == "harmonic":
        return HarmonicPotential(c["d"])
    if s == "pendulum":
        return PendulumPotential(c["d"])
    if s == "zero":
        return ZeroPotential(c["d"])
    if c.get("potential"):
        return load_json(c["potential"])
    return sample_torus_potential(c["d"], c["L"], seed)


def _default_region(c, pot):
    from .tori import Region

    r = float(c.get("radius", 5.0))
    d = c["d"]
    if c["system"] in ("zero", "torus"):
        return Region(np.zeros(d), np.full(d, 2 * math.pi))
    return Region(np.full(d, -r), np.full(d, r), r,
                  lambda q, p: np.sum(q**2, axis=1) + np.sum(p**2, axis=1) < r * r)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def _run_sample(c, seed, out, jobs):
    from .ensemble import sample_field, sample_torus_potential

    if c["kind"] == "torus":
        obj = sample_torus_potential(c["d"], c["L"], seed).to_json()
    else:
        obj = sample_field(c["d"], c["cutoff"], c["N"], seed).to_json()
    path = os.path.join(out, "potential.json")
    _write_json(path, obj)
    return [path]


def _run_melnikov(c, seed, out, jobs):
    from .model import melnikov_table, write_melnikov_csv

    rows = melnikov_table(c["I0"], c["theta"], c["grid"], c["sign"], c["T"])
    path = os.path.join(out, "melnikov.csv")
    write_melnikov_csv(path, rows)
    return [path]


def _run_integrate(c, seed, out, jobs):
    from .dynamics import PhaseState, integrate, write_trajectory_csv

    pot = _build_potential(c, seed)
    tr = integrate(PhaseState(np.array(c["q"], float), np.array(c["p"], float)), c["t_end"], c["h"], pot,
                   c["scheme"], c["record_every"])
    path = os.path.join(out, "trajectory.csv")
    write_trajectory_csv(path, tr)
    return [path]


def _run_chaos(c, seed, out, jobs):
    from .chaos import chaos_reports, write_crossings_csv, write_reports_json
    from .tori import _rejection_sample
    from .rng import generator

    pot = _build_potential(c, seed)
    q, p, _ = _rejection_sample(pot, _default_region(c, pot), tuple(c["band"]), c["n_samples"], generator(seed))
    reports = chaos_reports(q, p, pot, c["t_total"], c["h"])
    files = [os.path.join(out, "chaos_reports.json")]
    if c["crossings"]:
        from .model import ModelParams, heteroclinic_tangle

        tg = heteroclinic_tangle(ModelParams(c["d"], c["eta"]), arclen_max=c["arclen_max"])
        evidence = [{"point": cr.point.tolist(), "angle": cr.angle, "phase": ph}
                    for cr, ph in zip(tg.crossings, tg.phases)]
        for r in reports:
            r.evidence = evidence
        path = os.path.join(out, "crossings.csv")
        write_crossings_csv(path, tg.crossings, ("x_2", "P_2"))
        files.append(path)
    write_reports_json(files[0], reports)
    return files


def _run_tori(c, seed, out, jobs):
    from .tori import Budget, torus_fraction, write_samples_csv

    pot = _build_potential(c, seed)
    est = torus_fraction(pot, _default_region(c, pot), tuple(c["band"]), c["n_samples"], seed,
                         Budget(t_total=c["t_total"], h=c["h"]))
    files = [os.path.join(out, "tori.json"), os.path.join(out, "tori_samples.csv")]
    est.to_json(files[0])
    write_samples_csv(files[1], est)
    return files


def _run_survey(c, seed, out, jobs):
    from .survey import run_survey
    from .tori import Budget

    def progress(rec):
        log.info("L=%d trial=%d success=%s chaos_count=%d (%.1fs)", rec["L"], rec["trial"], rec["success"],
                 rec["chaos_count"], rec["runtime"])

    res = run_survey(c["d"], c["N"], tuple(c["L_list"]), c["trials"], tuple(c["band"]), Budget(**c["budget"]),
                     seed, jobs=jobs, progress=progress, cutoff=c["cutoff"], p_max=c["p_max"])
    return res.write(out)


def _run_covariance(c, seed, out, jobs):
    from .ensemble import covariance_table, write_covariance_csv

    ax = np.linspace(-c["extent"], c["extent"], c["points"])
    grid = np.stack(np.meshgrid(*[ax] * c["d"], indexing="ij"), axis=-1).reshape(-1, c["d"])
    path = os.path.join(out, "covariance.csv")
    write_covariance_csv(path, covariance_table(c["d"], c["L"], c["cutoff"], grid), c["d"])
    return [path]


PIPELINES = {
    "sample": _run_sample,
    "melnikov": _run_melnikov,
    "integrate": _run_integrate,
    "chaos": _run_chaos,
    "tori": _run_tori,
    "survey": _run_survey,
    "covariance": _run_covariance,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="hamiltonia", description="Chaos and invariant tori of random trigonometric Hamiltonians.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", metavar="subcommand", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON or YAML file with settings (flags override it)")
        sp.add_argument("--seed", type=int, help="master seed (default: $HAMILTONIA_SEED, else 0)")
        sp.add_argument("--output-dir", dest="output_dir", help="directory for outputs and manifest.json")
        sp.add_argument("--jobs", type=int, help="worker processes")
        sp.add_argument("-v", "--verbose", action="store_true")

    def system(sp):
        sp.add_argument("--system", choices=SYSTEMS)
        sp.add_argument("--d", type=int)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--L", type=int)
        sp.add_argument("--potential", help="potential JSON written by `sample`")

    sp = sub.add_parser("sample", help="draw a random potential")
    common(sp)
    sp.add_argument("--kind", choices=("torus", "field"))
    sp.add_argument("--d", type=int)
    sp.add_argument("--L", type=int)
    sp.add_argument("--cutoff", type=float)
    sp.add_argument("--N", type=int, help="field truncation")

    sp = sub.add_parser("melnikov", help="Melnikov gradient table, closed form vs quadrature")
    common(sp)
    sp.add_argument("--I0", type=float)
    sp.add_argument("--theta", type=float)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--sign", type=int)
    sp.add_argument("--T", type=float)

    sp = sub.add_parser("integrate", help="integrate one orbit")
    common(sp)
    system(sp)
    sp.add_argument("--q", type=float, nargs="+")
    sp.add_argument("--p", type=float, nargs="+")
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--h", type=float)
    sp.add_argument("--scheme", choices=("leapfrog", "order4"))
    sp.add_argument("--record-every", dest="record_every", type=int)

    for name, helptext in (("chaos", "chaos indicators on a band sample"), ("tori", "torus fraction on a band")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        system(sp)
        sp.add_argument("--band", type=float, nargs=2, metavar=("H1", "H2"))
        sp.add_argument("--n-samples", dest="n_samples", type=int)
        sp.add_argument("--t-total", dest="t_total", type=float)
        sp.add_argument("--h", type=float)
        if name == "chaos":
            sp.add_argument("--crossings", action="store_true", default=None,
                            help="also trace the heteroclinic tangle of the d = 2 model")
            sp.add_argument("--arclen-max", dest="arclen_max", type=float)
        else:
            sp.add_argument("--radius", type=float)

    sp = sub.add_parser("survey", help="coexistence survey over random potentials")
    common(sp)
    sp.add_argument("--d", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--L-list", dest="L_list", type=int, nargs="+")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--band", type=float, nargs=2, metavar=("H1", "H2"))
    sp.add_argument("--cutoff", type=float)
    sp.add_argument("--p-max", dest="p_max", type=float, help="momentum box half-width (default sqrt(2 h2))")
    sp.add_argument("--n-traj", dest="budget_n_traj", type=int)
    sp.add_argument("--t-total", dest="budget_t_total", type=float)
    sp.add_argument("--h", dest="budget_h", type=float)
    sp.add_argument("--record-every", dest="budget_record_every", type=int)

    sp = sub.add_parser("covariance", help="torus vs continuum covariance on a grid")
    common(sp)
    sp.add_argument("--d", type=int)
    sp.add_argument("--L", type=int)
    sp.add_argument("--cutoff", type=float)
    sp.add_argument("--extent", type=float)
    sp.add_argument("--points", type=int)
    return p


def _timestamp():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv or argv[0] not in SUBCOMMANDS + ("-h", "--help", "--version"):
        if argv and not argv[0].startswith("-"):
            sys.stderr.write(f"hamiltonia: unknown subcommand {argv[0]!r}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"hamiltonia: {exc}\n")
        return EXIT_USAGE if exc.unknown_command else EXIT_INVALID
    except SystemExit as exc:
        return int(exc.code or 0)
    cmd = args.subcommand
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg, seed, out, jobs = _resolve(cmd, args)
    except ValidationError as exc:
        sys.stderr.write(f"hamiltonia {cmd}: {exc}\n")
        return EXIT_INVALID
    start = _timestamp()
    try:
        os.makedirs(out, exist_ok=True)
        files = PIPELINES[cmd](cfg, seed, out, jobs)
    except (ValidationError, ValueError) as exc:
        sys.stderr.write(f"hamiltonia {cmd}: {exc}\n")
        return EXIT_INVALID if isinstance(exc, ValidationError) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - reported, not swallowed
        sys.stderr.write(f"hamiltonia {cmd}: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME
    manifest = {
        "subcommand": cmd,
        "config": cfg,
        "seed": seed,
        "master_seed": seed,
        "version": __version__,
        "rng": ALGORITHM,
        "start": start,
        "end": _timestamp(),
        "outputs": [os.path.relpath(f, out) for f in files],
    }
    _write_json(os.path.join(out, "manifest.json"), manifest)
    print(os.path.join(out, "manifest.json"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
