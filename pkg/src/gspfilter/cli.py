"""Command-line front end.

Subcommands
-----------
``filter``
    Solve the filtering problem for each configured signal/noise pair with
    the selected methods, write the filter operators and an MSE table.
``verify``
    Run the invariant suite and print a pass/fail table.
``decay``
    Assemble columns of the Gabor symbol matrix, fit the off-diagonal decay
    and tabulate a truncation-radius sweep.

Each completed run writes ``summary.json`` into the output directory, whether
its checks pass or not.  Exit codes: 0 when all checks pass, 1 when a check
fails, 2 for invalid input (reported on stderr before any output is written).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .gabor import analyze, dual_window, synthesize
from .gabor_matrix import (build_M, decay_fit, default_radius, rough_coefficients, stft_table,
                           symbol_coefficients)
from .grid import Grid, GridFunction, fourier, inner, norm
from .gsp import CovarianceOperator, NotPSDError, wss_cov
from .io import fmt, read_array2
from .solvers import (CommutationError, RangeConditionError, SpectralFloorError, lmmse_oracle, mse,
                      oracle_scale, residual_orthogonality, solve_commuting, solve_douglas, solve_general,
                      solve_wss)
from .spectral import measure_from_name
from .weyl import WeylSymbol, cross_wigner, weyl_quantize

__all__ = ["main", "cmd_filter", "cmd_verify", "cmd_decay", "probe_function"]

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


# helpers -----------------------------------------------------------------------

def _num(v):
    """JSON-safe float rounded to 12 significant digits (byte-stable output)."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(f"{v:.12e}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return None if obj is None else bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return str(obj)


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class _Table:
    """Collects named checks and prints them as aligned pass/fail lines."""

    def __init__(self, quiet: bool):
        self.rows = []
        self.quiet = quiet

    def add(self, name: str, value: float, threshold: float, ok: Optional[bool] = None, note: str = ""):
        ok = bool(value <= threshold) if ok is None else bool(ok)
        self.rows.append({"name": name, "value": value, "threshold": threshold, "pass": ok, "note": note})
        if not self.quiet:
            print(f"{'PASS' if ok else 'FAIL'}  {name:<32s} value={value:.3e}  threshold={threshold:.3e}  {note}")
        return ok

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)


def probe_function(grid: Grid, kind: str, params) -> GridFunction:
    """Gaussian, modulated Gaussian or smooth bump on ``grid``."""
    X = grid.nodes("x")
    if kind in ("gaussian", "modulated"):
        x0, s = params[0], params[1]
        r2 = sum((x - x0) ** 2 for x in X)
        vals = np.exp(-r2 / (2 * s * s)).astype(complex)
        if kind == "modulated":
            vals = vals * np.exp(1j * params[2] * sum(X))
    elif kind == "bump":
        x0, r = params
        t2 = sum((x - x0) ** 2 for x in X) / (r * r)
        vals = np.zeros(grid.shape, dtype=complex)
        inside = t2 < 1
        vals[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    else:
        raise ValueError(f"unknown test function {kind!r}")
    return GridFunction(vals, grid)


def _covariance(spec: str, grid: Grid) -> CovarianceOperator:
    """``file PATH`` loads a kernel matrix (PSD-checked); anything else is a measure."""
    spec = spec.strip()
    if spec.lower().startswith("file "):
        K, g = read_array2(spec[5:].strip())
        if g != grid:
            raise ValueError(f"covariance file grid {g} does not match the configured grid {grid}")
        return CovarianceOperator(K, grid, check=True)
    return wss_cov(measure_from_name(grid, spec))


# filter ------------------------------------------------------------------------

def cmd_filter(cfg: RunConfig, quiet: bool = False) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    phis = [(label, probe_function(grid, kind, p)) for label, kind, p in cfg.phi()]
    table = _Table(quiet)
    mse_rows, cases = [], []
    for ci, (sig, noi) in enumerate(cfg.filter_cases()):
        mu_u, mu_w = measure_from_name(grid, sig), measure_from_name(grid, noi)
        Ku, Kw = wss_cov(mu_u), wss_cov(mu_w)
        scale = max(float(np.linalg.norm(Ku.matrix, 2)), 1e-300)
        sols = {}
        for m in cfg.methods():
            try:
                if m == "wss":
                    sol = solve_wss(mu_u, mu_w, cfg.tau())
                elif m == "commuting":
                    sol = solve_commuting(Ku, Kw, cfg.tau())
                elif m == "general":
                    sol = solve_general(Ku, Kw)
                else:
                    sol = solve_douglas(Ku, Kw)
            except (SpectralFloorError, RangeConditionError, CommutationError) as exc:
                table.add(f"case{ci}/{m}", float("inf"), 1e-8, ok=False, note=type(exc).__name__)
                continue
            sols[m] = sol
            sol.save(out / f"case{ci}_{m}", grid)
            table.add(f"case{ci}/{m} residual", sol.residual / scale, 1e-8)
            for label, phi in phis:
                mse_rows.append([ci, sig, noi, m, label, fmt(mse(sol.F, Ku, Kw, phi, grid)), fmt(sol.residual)])
        if len(sols) > 1:
            ref = next(iter(sols.values())).F
            spread = max(float(np.abs(s.F - ref).max()) for s in sols.values())
            table.add(f"case{ci} method agreement", spread, 1e-8 * max(float(np.abs(ref).max()), 1.0))
        cases.append({"case": ci, "signal": sig, "noise": noi,
                      "solutions": {m: s.summary() for m, s in sols.items()}})
    _write_csv(out / "mse.csv", ["case", "signal", "noise", "method", "phi", "J", "residual"], mse_rows)
    _write_json(out / "summary.json", {"command": "filter", "seed": cfg.seed, "grid": {"n": grid.n, "L": grid.L,
                "dim": grid.dim}, "cases": cases, "checks": table.rows, "passed": table.passed})
    return EXIT_OK if table.passed else EXIT_FAIL


# verify ------------------------------------------------------------------------

def _fault_matrix(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 7])
    E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return E / np.linalg.norm(E, 2)


def cmd_verify(cfg: RunConfig, quiet: bool = False, fault: Optional[float] = None) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.grid()
    seed = cfg.seed
    fault = float(cfg.get("verify", "fault")) if fault is None else float(fault)
    table = _Table(quiet)
    rng = np.random.default_rng([seed, 1])

    # Parseval on a random grid function
    f = GridFunction(rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape), grid)
    table.add("parseval", abs(norm(fourier(f)) - norm(f)) / norm(f), 1e-12)

    # Weyl-Wigner pairing (one-dimensional grids)
    if grid.dim == 1:
        a = WeylSymbol(rng.standard_normal((2 * grid.n, grid.n)) + 1j * rng.standard_normal((2 * grid.n, grid.n)),
                       grid)
        g = GridFunction(rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n), grid)
        af = GridFunction(grid.h * weyl_quantize(a) @ f.values, grid)
        lhs = inner(af, g)
        W = cross_wigner(g, f)
        rhs = (2 * np.pi) ** -0.5 * 0.5 * grid.h * grid.dxi * np.vdot(W.values, a.values)
        table.add("weyl-wigner pairing", abs(lhs - rhs) / max(abs(lhs), 1e-300), 1e-10)

    # Gabor frame reconstruction
    sys_g = cfg.gabor_system()
    dual_window(sys_g)
    g2 = sys_g.grid2
    X1, X2 = g2.nodes("x")
    f2 = np.exp(-((X1 - 0.7) ** 2 + (X2 + 0.4) ** 2) / 3) * np.exp(1.3j * X1)
    rec = synthesize(sys_g, analyze(sys_g, f2, "dual"), "primal").values
    table.add("frame reconstruction", float(np.linalg.norm(rec - f2) / np.linalg.norm(f2)), 1e-10)

    # filtering checks
    Ku = _covariance(cfg.get("verify", "signal"), grid)
    Kw = _covariance(cfg.get("verify", "noise"), grid)
    try:
        sol = solve_general(Ku, Kw)
    except SpectralFloorError:
        sol = solve_douglas(Ku, Kw)
    F = sol.F
    if fault:
        F = F + fault * np.linalg.norm(F, 2) * _fault_matrix(F.shape[0], seed)
    N = int(float(cfg.get("verify", "N")))
    rep = residual_orthogonality(F, Ku, Kw, N=N, seed=seed, grid=grid)
    table.add("residual orthogonality", rep.relative, 1e-8, note="exact")
    if N > 0:
        table.add("residual orthogonality (MC)", rep.mc_max, rep.mc_bound, note=f"N={N}")
    No = int(float(cfg.get("verify", "oracle_N")))
    if No > 0:
        orc = lmmse_oracle(Ku, Kw, No, seed, grid)
        err = float(np.abs(orc.F - F).max())
        table.add("oracle agreement", err, 5 * oracle_scale(Ku, Kw, sol.F) / np.sqrt(No), note=f"N={No}")
    _write_json(out / "summary.json", {"command": "verify", "seed": seed, "fault": fault, "method": sol.method,
                                       "checks": table.rows, "passed": table.passed})
    return EXIT_OK if table.passed else EXIT_FAIL


# decay -------------------------------------------------------------------------

def _decay_coefficients(cfg: RunConfig, sys_g, name: str):
    if name == "gaussian":
        grid = sys_g.symbol_grid()
        return symbol_coefficients(sys_g, WeylSymbol.from_function(grid, lambda z, x: np.exp(-(z * z + x * x))))
    if name == "rough":
        return rough_coefficients(sys_g, float(cfg.get("decay", "r")), seed=cfg.seed)
    return rough_coefficients(sys_g, 0.0) * 0.0


def cmd_decay(cfg: RunConfig, quiet: bool = False) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    sys_g = cfg.gabor_system()
    tab = stft_table(sys_g)
    t_target = float(cfg.get("decay", "t_target"))
    R0 = default_radius()
    table = _Table(quiet)
    sweep, reports = [], {}
    cols = [(0, 0, 0, 0), (2, -1, 1, 0)]
    for name in cfg.decay_symbols():
        gb = _decay_coefficients(cfg, sys_g, name)
        M = build_M(sys_g, gb, R=R0, columns=cols, table=tab)
        M.to_csv(out / f"decay_{name}_M.csv", threshold=1e-300)
        rep = decay_fit(M, t_target=t_target)
        rep.to_json(out / f"decay_{name}.json")
        reports[name] = {"fitted_t": rep.fitted_t, "violations": rep.violations, "C": rep.C,
                         "max_entry": float(np.abs(M.values).max())}
        if name == "empty":
            table.add(f"{name} zero matrix", float(np.abs(M.values).max()), 0.0)
        else:
            table.add(f"{name} fitted t >= target", t_target - rep.fitted_t, 0.0, note=f"t={rep.fitted_t:.3f}")
            table.add(f"{name} decay violations", rep.violations, 0)
        ref = build_M(sys_g, gb, R=2 * R0, columns=cols[:1], table=tab).values
        for R in cfg.radii():
            vals = build_M(sys_g, gb, R=R, columns=cols[:1], table=tab).values
            change = float(np.abs(vals - ref).max())
            tail = float(np.exp(-R * R / 4))
            sweep.append([name, fmt(R), fmt(tail), fmt(change)])
            if tail < 1e-12:
                table.add(f"{name} truncation R={R:g}", change, 1e-10)
    _write_csv(out / "radius_sweep.csv", ["symbol", "R", "tail_bound", "max_change"], sweep)
    _write_json(out / "summary.json", {"command": "decay", "seed": cfg.seed, "t_target": t_target,
                                       "default_R": R0, "symbols": reports, "checks": table.rows,
                                       "passed": table.passed})
    return EXIT_OK if table.passed else EXIT_FAIL


# entry point -------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides run.out)")
    common.add_argument("--seed", metavar="U64", type=int, help="random seed (overrides run.seed)")
    common.add_argument("--quiet", action="store_true", help="suppress the pass/fail table")
    p = argparse.ArgumentParser(prog="gspfilter", description="Optimal filtering of generalized stochastic processes")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("filter", parents=[common], help="solve and tabulate mean square errors")
    v = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    v.add_argument("--inject-fault", type=float, default=None, metavar="EPS",
                   help="perturb the filter by EPS times its norm before the checks")
    sub.add_parser("decay", parents=[common], help="off-diagonal decay of the Gabor symbol matrix")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, seed=args.seed, out=args.out)
        if args.command == "filter":
            return cmd_filter(cfg, args.quiet)
        if args.command == "verify":
            return cmd_verify(cfg, args.quiet, args.inject_fault)
        return cmd_decay(cfg, args.quiet)
    except (ConfigError, NotPSDError, OSError, ValueError) as exc:
        print(f"gspfilter: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
