"""Compare the compiled kernels with the numpy fallback.

Run ``python3 benchmarks/bench_kernels.py [--repeat N] [--json PATH]``.
Each kernel is timed on the default Gabor system (``n2 = 64``) with inputs
sized so that the fallback finishes in seconds; outputs of the two backends
are compared before timing.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from gspfilter import _kernels_py as pure
from gspfilter import gabor_matrix as gm
from gspfilter.gabor import default_system

try:
    from gspfilter import _kernels as compiled
except ImportError:  # pragma: no cover - extension not built
    compiled = None


def _inputs(seed: int = 0):
    sys = default_system()
    table = gm.stft_table(sys)
    rng = np.random.default_rng(seed)
    P, Q = sys.P, sys.Q
    idx = sys.lattice_indices()
    coef = rng.standard_normal(sys.size) + 1j * rng.standard_normal(sys.size)
    coef *= np.exp(-0.05 * (idx**2).sum(axis=1))
    ga = np.ascontiguousarray(idx, dtype=np.int_)
    om = np.ascontiguousarray(idx[rng.choice(sys.size, 64, replace=False)], dtype=np.int_)
    wom = np.ascontiguousarray(coef[:64])
    nmax = int(np.floor((gm.default_radius() / sys.a) ** 2)) + 1
    gtab = np.exp(-sys.a * sys.b / 4 * np.arange(nmax))
    ptab, poff = gm._phase_table(sys)
    W = np.zeros((2 * P, 2 * P, 2 * Q, 2 * Q), dtype=complex)
    compiled_or_pure = compiled if compiled is not None else pure
    compiled_or_pure.w_accumulate(W, om, wom, ga, coef, gtab, ptab, poff, 0.0)
    nz = np.nonzero(W)
    wlist = np.ascontiguousarray(np.stack(nz, axis=1)[:400], dtype=np.int_)
    wvals = np.ascontiguousarray(W[nz][:400])
    hl = np.ascontiguousarray(table.offsets[:400])
    hv = np.ascontiguousarray(table.entries[:400])
    A = rng.standard_normal((256, 256)) + 1j * rng.standard_normal((256, 256))
    A = A @ A.conj().T + 256 * np.eye(256)
    B = rng.standard_normal((256, 64)) + 1j * rng.standard_normal((256, 64))
    return dict(sys=sys, table=table, om=om, wom=wom, ga=ga, coef=coef, gtab=gtab, ptab=ptab, poff=poff,
                W=W, wlist=wlist, wvals=wvals, hl=hl, hv=hv, A=A, B=B)


def _cases(mod, d):
    P, Q = d["sys"].P, d["sys"].Q
    size = d["sys"].size
    return {
        "w_accumulate": lambda: mod.w_accumulate(np.zeros_like(d["W"]), d["om"], d["wom"], d["ga"], d["coef"],
                                                 d["gtab"], d["ptab"], d["poff"], 0.0),
        "gather_w": lambda: mod.gather_w(np.zeros(size, complex), d["wlist"], d["wvals"], d["table"].values,
                                         P, Q, d["ptab"], d["poff"]),
        "gather_v": lambda: mod.gather_v(np.zeros(size, complex), d["W"], d["hl"], d["hv"], P, Q,
                                         d["ptab"], d["poff"]),
        "gauss_solve": lambda: mod.gauss_solve(d["A"], d["B"]),
    }


def _time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def run(repeat: int = 3) -> dict:
    d = _inputs()
    py = _cases(pure, d)
    results = {}
    if compiled is None:
        print("compiled kernels not built; timing the numpy fallback only")
    cy = _cases(compiled, d) if compiled is not None else {}
    print(f"{'kernel':<14s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>9s} {'max diff':>10s}")
    for name, fn in py.items():
        ref = np.asarray(fn())
        tp = _time(fn, repeat)
        row = {"python_s": tp}
        if name in cy:
            out = np.asarray(cy[name]())
            diff = float(np.abs(out - ref).max() / max(np.abs(ref).max(), 1e-300))
            tc = _time(cy[name], repeat)
            row.update(cython_s=tc, speedup=tp / tc, max_rel_diff=diff)
            print(f"{name:<14s} {tp:12.4f} {tc:12.4f} {tp / tc:9.1f} {diff:10.1e}")
        else:
            print(f"{name:<14s} {tp:12.4f} {'-':>12s}")
        results[name] = row
    return results


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", metavar="PATH", help="also write the timings as JSON")
    args = p.parse_args(argv)
    res = run(args.repeat)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2, sort_keys=True)
            fh.write("\n")


if __name__ == "__main__":
    main()
