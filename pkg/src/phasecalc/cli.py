"""Experiment orchestration: config parsing, verification suites, reports.

Verbs: ``check`` (run one suite), ``solve`` (energy suite), ``sweep``
(k-sweep and cutoff-sweep), ``report`` (flatten JSON reports into plot-ready
CSV bundles).  Exit codes: 0 all checks pass, 1 suite failure, 2 config
error.  All random probes are seeded, so identical config + seed produces
byte-identical JSON reports.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

__all__ = ["ExperimentConfig", "load_config", "run_suite", "emit_plotdata",
           "main", "SUITES"]

SUITES = (
    "weights-axioms",
    "symbol-class",
    "calculus",
    "conjugation",
    "reduction",
    "energy",
    "cone",
    "full-pipeline",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    suite: str
    seed: int
    out_dir: Path
    kappa: float = 0.5
    q: float = 4.0 / 3.0
    sigma: float = 3.0
    k: float = 1.0
    N: float = 2.0
    T: float = 1.0
    m: int = 2
    X: float = 8.0
    n_x: int = 128
    dt: float = 0.0          # 0 = derive from the CFL bound
    lam: float = 5.0
    budget: float = 0.1
    n_draws: int = 3

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ConfigError(
                f"unknown suite '{self.suite}'; choose from {', '.join(SUITES)}")
        if not 1.0 <= self.q < 1.5:
            raise ConfigError("q ∈ [1, 3/2) required")
        sigma_cap = math.inf if self.q == 1.0 else self.q / (self.q - 1.0)
        if not (3.0 <= self.sigma < sigma_cap):
            raise ConfigError(
                f"σ ∈ [3, q/(q-1)) required; got σ = {self.sigma} at q = {self.q}")
        if self.k < 1:
            raise ConfigError("k >= 1 required")
        if not 0 <= self.kappa <= 1:
            raise ConfigError("κ ∈ [0, 1] required")
        if self.m < 2:
            raise ConfigError("m >= 2 required")
        if self.N <= 0 or self.T <= 0 or self.X <= 0:
            raise ConfigError("N, T, X must be positive")
        if self.n_x < 16 or self.n_x % 2:
            raise ConfigError("n_x must be even and >= 16")
        if self.lam < 0 or self.budget <= 0:
            raise ConfigError("lambda >= 0 and budget > 0 required")
        self.out_dir = Path(self.out_dir)


_KEYMAP = {
    "kappa": "kappa", "q": "q", "sigma": "sigma", "k": "k", "N": "N",
    "T": "T", "m": "m", "X": "X", "n_x": "n_x", "dt": "dt", "lambda": "lam",
    "budget": "budget", "n_draws": "n_draws",
}


def load_config(path, suite=None, seed=None, out=None) -> ExperimentConfig:
    """Read TOML (default) or JSON config; CLI flags override file values."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        if p.suffix == ".json":
            raw = json.loads(p.read_text())
        else:
            raw = tomllib.loads(p.read_text())
    flat = {}
    for section in ("problem", "grid", "solver"):
        flat.update(raw.get(section, {}))
    flat.update({k: v for k, v in raw.items() if not isinstance(v, dict)})
    kwargs = {}
    for key, value in flat.items():
        if key in ("suite", "seed", "out_dir", "out"):
            continue
        if key not in _KEYMAP:
            raise ConfigError(f"unknown config key '{key}'")
        kwargs[_KEYMAP[key]] = value
    flat.update({k: raw[k] for k in ("suite", "seed", "out") if k in raw})
    suite = suite or flat.get("suite")
    if suite is None:
        raise ConfigError("a suite is required (--suite or config key)")
    seed = seed if seed is not None else flat.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or config key) "
                          "for reproducible probes")
    out = out or flat.get("out", "reports")
    return ExperimentConfig(suite=suite, seed=int(seed), out_dir=Path(out),
                            **kwargs)


# -- suites ------------------------------------------------------------------

def _suite_weights(cfg, rng):
    from .weights import BracketPower, check_weight_axioms
    rep = check_weight_axioms(BracketPower(cfg.kappa))
    return {
        "passed": bool(rep.passed),
        "axioms": {name: {"constant": e.constant, "passed": e.passed}
                   for name, e in rep.entries.items()},
        "temperance_exponent": rep.temperance_exponent,
    }, {}


def _pm(cfg):
    from .phase_metric import PhaseMetric
    from .weights import BracketPower
    return PhaseMetric(BracketPower(cfg.kappa), k=cfg.k)


def _grid(cfg, n=None):
    from .grids import Grid1D
    return Grid1D(cfg.X, n or cfg.n_x)


def _suite_symbols(cfg, rng):
    from .symbols import membership_check, sample_symbol
    pm = _pm(cfg)
    g = _grid(cfg)
    sym = sample_symbol(
        lambda x, xi: pm.phi(x) * np.sqrt(cfg.k**2 + xi**2), g, (1.0, 1.0))
    rep = membership_check(sym, pm)
    return {
        "passed": bool(rep.passed),
        "B": rep.B, "C": rep.C, "edge_ratio": rep.edge_ratio,
        "drift": rep.drift,
    }, {}


def _suite_calculus(cfg, rng):
    from .calculus import compose_asymptotic, parametrix, probe_discrepancy, quantize
    from .phase_metric import PhaseMetric
    from .symbols import sample_symbol
    from .weights import BracketPower
    g = _grid(cfg)
    p = sample_symbol(lambda x, xi: (1.0 + xi**2) + 0.0 * x, g, (2.0, 0.0))
    q_sym = sample_symbol(lambda x, xi: (1.0 + x**2) + 0.0 * xi, g, (0.0, 2.0))
    comp_rems = [compose_asymptotic(p, q_sym, J=J).remainder_norm
                 for J in (1, 2, 3)]
    pm4 = PhaseMetric(BracketPower(1.0), k=4.0)
    ell = sample_symbol(
        lambda x, xi: pm4.phi(x) ** 2 + 16.0 + xi**2, g, (2.0, 0.0))
    ell_mat = quantize(ell).matrix
    eye = np.eye(g.n)
    par_resids = [probe_discrepancy(quantize(parametrix(ell, J=J, pm=pm4)).matrix
                                    @ ell_mat, eye, g) for J in (1, 2, 3)]
    passed = (all(b < a for a, b in zip(comp_rems, comp_rems[1:]))
              and comp_rems[-1] <= 1e-8
              and all(b < a for a, b in zip(par_resids, par_resids[1:]))
              and par_resids[-1] <= 0.05)
    return {
        "passed": bool(passed),
        "composition_remainders": comp_rems,
        "parametrix_residuals": par_resids,
    }, {}


def _suite_conjugation(cfg, rng):
    from .conjugation import identity_defect_sweep
    from .weights import BracketPower
    g = _grid(cfg)
    rep = identity_defect_sweep(BracketPower(cfg.kappa), cfg.sigma,
                                min(0.05, cfg.budget / 2), g)
    passed = all(rep["contractive"]) and rep["slope"] < 0
    csv_rows = {"k_sweep": [("k", "norm")] + list(zip(rep["ks"], rep["norms"]))}
    return {"passed": bool(passed), **rep}, csv_rows


def _osc_problem(cfg):
    from .hyperbolic import HyperbolicProblem
    return HyperbolicProblem.oscillatory_example(
        kappa=cfg.kappa, q=cfg.q, sigma=cfg.sigma, T=cfg.T, k=cfg.k)


def _suite_reduction(cfg, rng):
    from .hyperbolic import Mollifier, build_first_order, diagonalizer_sweep, mollify_root
    prob = _osc_problem(cfg)
    g = _grid(cfg)
    rho = Mollifier()
    t_mid = cfg.T / 2
    sysm = build_first_order(prob, g, t_mid, rho=rho)
    X, XI = g.x[:, None], g.xi[None, :]
    roots = np.sort(np.stack([
        np.real(mollify_root(prob.char_root_sampler(j), prob.pm, rho,
                             t_mid, X, XI, prob.T))
        for j in range(prob.m)]), axis=0)
    sweep = diagonalizer_sweep(roots, prob.pm, g)
    res = sweep["result"]
    passed = (res.nilpotency_defect == 0.0
              and res.symbol_identity_defect <= 1e-12
              and res.K_norm < 1.0)
    csv_rows = {"cutoff_sweep": [("M", "K_norm")]
                + list(zip(sweep["Ms"], sweep["norms"]))}
    return {
        "passed": bool(passed),
        "cutoff_Ms": sweep["Ms"],
        "K_norms": sweep["norms"],
        "chosen_M": sweep["chosen_M"],
        "nilpotency_defect": res.nilpotency_defect,
        "symbol_identity_defect": res.symbol_identity_defect,
        "system_blocks": sysm.m,
    }, csv_rows


def _energy_runs(cfg, rng, n_draws):
    from .grids import band_limited_probe
    from .solver import conjugated_solve, gronwall_fit
    prob = _osc_problem(cfg)
    g = _grid(cfg)
    n = g.n
    constants, traces = [], []
    dt = cfg.dt if cfg.dt > 0 else None
    for _ in range(n_draws):
        data = np.concatenate([band_limited_probe(g, rng),
                               band_limited_probe(g, rng)])
        x0 = rng.uniform(-2.0, 2.0)
        t_pulse = rng.uniform(0.2 * cfg.T, 0.8 * cfg.T)
        pulse = np.exp(-((g.x - x0) ** 2))

        def source(t, pulse=pulse, t_pulse=t_pulse):
            v = np.zeros(2 * n, complex)
            v[n:] = pulse * math.exp(-(((t - t_pulse) / 0.1) ** 2))
            return v

        traj = conjugated_solve(prob, cfg.lam, data, source, g, dt=dt,
                                eps_cap=cfg.budget)
        if dt is None:
            dt = float(traj.ts[1] - traj.ts[0])
        constants.append(gronwall_fit(traj.trace)["C"])
        traces.append(traj.trace)
    return constants, traces, dt


def _suite_energy(cfg, rng):
    constants, traces, dt = _energy_runs(cfg, rng, cfg.n_draws)
    C = max(constants)
    passed = math.isfinite(C)
    tr = traces[0]
    csv_rows = {"energy_trace": [("t", "l2", "weighted", "cumF")]
                + [tuple(r) for r in tr.rows()]}
    return {
        "passed": bool(passed),
        "gronwall_C": C,
        "per_draw_C": constants,
        "dt": dt,
    }, csv_rows


def _suite_cone(cfg, rng):
    from .calculus import quantize
    from .cone import Cone, cone_condition_check, cone_speed, support_interval
    from .grids import Grid1D
    from .solver import time_step_solve
    from .symbols import sample_symbol
    prob = _osc_problem(cfg)
    # the undersized-cone crossing needs a fine grid, a wide window, and a
    # vertex time inside the fast stretch of the coefficient's time factor
    g = Grid1D(max(cfg.X, 16.0), max(cfg.n_x, 512))
    n = g.n
    c = cone_speed(prob, g)
    d2 = quantize(sample_symbol(lambda x, xi: -(xi**2) + 0.0 * x, g,
                                (2.0, 0.0))).matrix

    class _WaveOp:
        # acts like the dense first-order block matrix without forming it
        def __init__(self, a_vals):
            self.a = a_vals

        def __matmul__(self, W):
            u, v = W[:n], W[n:]
            return np.concatenate([v, self.a * (d2 @ u)])

    def A(t):
        return _WaveOp(prob.a(t, g.x))

    t_vertex = min(0.75, cfg.T)
    dt = 2.5e-4
    slice_ts = np.linspace(0.0, t_vertex, 9)

    def run(u0):
        W0 = np.concatenate([u0, np.zeros(n)])
        traj = time_step_solve(A, W0, None, dt, (0.0, t_vertex), g)
        idxs = [int(round(t / dt)) for t in slice_ts]
        return ([traj.ts[i] for i in idxs],
                [traj.states[i][:n] for i in idxs])

    cone = Cone(0.0, t_vertex, c, prob.pm.phi)
    # bump outside the full base: must stay outside the true cone
    ts, us = run(np.exp(-0.5 * ((g.x - 5.2) / 0.3) ** 2))
    rep_pass = cone_condition_check(ts, us, g, cone)
    # bump in the annulus between the half-speed and full bases: vanishes on
    # the undersized cone's base but crosses its interior
    tsb, usb = run(np.exp(-0.5 * ((g.x - 2.65) / 0.25) ** 2))
    rep_fail = cone_condition_check(tsb, usb, g, cone.shrunk(0.5))
    radii = []
    for t, u in zip(ts, us):
        si = support_interval(u, g)
        radii.append((t, 0.0 if si is None else max(abs(si[0]), abs(si[1]))))
    passed = rep_pass["passed"] and not rep_fail["passed"]
    csv_rows = {"support_radius": [("t", "radius")] + radii}
    return {
        "passed": bool(passed),
        "cone_speed": c,
        "full_cone": {"passed": rep_pass["passed"],
                      "worst_violation_cells": rep_pass["worst_violation_cells"]},
        "shrunken_cone": {"passed": rep_fail["passed"],
                          "worst_violation_cells": rep_fail["worst_violation_cells"]},
    }, csv_rows


def _suite_full(cfg, rng):
    reports = {}
    csv_rows = {}
    passed = True
    for name, fn in (("reduction", _suite_reduction),
                     ("energy", _suite_energy),
                     ("cone", _suite_cone)):
        rep, rows = fn(cfg, rng)
        reports[name] = rep
        csv_rows.update(rows)
        passed = passed and rep["passed"]
    return {"passed": bool(passed), **reports}, csv_rows


_SUITE_FNS = {
    "weights-axioms": _suite_weights,
    "symbol-class": _suite_symbols,
    "calculus": _suite_calculus,
    "conjugation": _suite_conjugation,
    "reduction": _suite_reduction,
    "energy": _suite_energy,
    "cone": _suite_cone,
    "full-pipeline": _suite_full,
}


def run_suite(cfg: ExperimentConfig) -> int:
    """Execute one suite; write JSON report + CSV traces; return exit code."""
    rng = np.random.default_rng(cfg.seed)
    report, csv_rows = _SUITE_FNS[cfg.suite](cfg, rng)
    report = {
        "suite": cfg.suite,
        "seed": cfg.seed,
        "parameters": {
            "kappa": cfg.kappa, "q": cfg.q, "sigma": cfg.sigma, "k": cfg.k,
            "N": cfg.N, "T": cfg.T, "m": cfg.m, "X": cfg.X, "n_x": cfg.n_x,
            "lambda": cfg.lam, "budget": cfg.budget,
        },
        **report,
    }
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out_json = cfg.out_dir / f"{cfg.suite}.json"
    out_json.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for name, rows in csv_rows.items():
        with open(cfg.out_dir / f"{cfg.suite}_{name}.csv", "w",
                  newline="") as fh:
            csv.writer(fh).writerows(rows)
    return 0 if report["passed"] else 1


def emit_plotdata(report_dir) -> list:
    """Flatten JSON reports in a directory into plot-ready CSV files."""
    d = Path(report_dir)
    reports = sorted(d.glob("*.json")) if d.is_dir() else []
    if not reports:
        raise ConfigError(
            f"no suite reports found in '{d}'; expected files like "
            f"{', '.join(s + '.json' for s in SUITES[:3])} ...")
    written = []
    summary_rows = [("suite", "key", "value")]
    for path in reports:
        rep = json.loads(path.read_text())
        suite = rep.get("suite", path.stem)
        for key, value in sorted(rep.items()):
            if isinstance(value, (int, float, bool)):
                summary_rows.append((suite, key, value))
        if "ks" in rep and "norms" in rep:
            out = d / f"{suite}_k_sweep_flat.csv"
            with open(out, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("k", "norm", "slope"))
                for k_val, nrm in zip(rep["ks"], rep["norms"]):
                    w.writerow((k_val, nrm, rep.get("slope", "")))
            written.append(out)
    out = d / "summary.csv"
    with open(out, "w", newline="") as fh:
        csv.writer(fh).writerows(summary_rows)
    written.append(out)
    return written


# -- entry point -------------------------------------------------------------

def _build_parser():
    ap = argparse.ArgumentParser(
        prog="phasecalc",
        description="verification suites for the weighted phase-space toolkit")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("check", "solve", "sweep"):
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None)
        p.add_argument("--suite", default=None, choices=SUITES)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
    rp = sub.add_parser("report")
    rp.add_argument("--out", default="reports")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "report":
            written = emit_plotdata(args.out)
            for path in written:
                print(path)
            return 0
        suite = args.suite
        if args.verb == "solve":
            suite = suite or "energy"
        elif args.verb == "sweep":
            suite = suite or "conjugation"
        cfg = load_config(args.config, suite=suite, seed=args.seed,
                          out=args.out)
        return run_suite(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
