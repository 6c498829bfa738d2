"""Compare the compiled and pure-Python kernel backends.

Times the three kernel-backed steps (router cancellation, one MWU
feasibility call, the Cancel-Vertex sweep) on random planar instances::

    python3 benchmarks/bench_kernels.py --sizes 200 1000 --repeat 3
"""

import argparse
import time

import numpy as np

from emdflow import _backend
from emdflow.flow import supply_vector
from emdflow.instance import Instance
from emdflow.mwu import normalize
from emdflow.pipeline import prepare
from emdflow.rounding import extract_map
from emdflow.sketch import route_flow


def instance(n, rng):
    pts = rng.uniform(0, 1000, (n, 2))
    mu = np.where(np.arange(n) % 2 == 0, 1, -1)
    return Instance.from_arrays(pts, mu)


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 1000, 4000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rounds", type=int, default=200, help="MWU rounds per timed call")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = ["python"] + (["compiled"] if _backend.compiled_available() else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the Python backend only")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'|E|':>9} {'step':>8} " + " ".join(f"{b:>10}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        inst = instance(n, rng)
        q, g, s = prepare(inst, 0.5, args.seed)
        b = supply_vector(inst, g)
        sys = normalize(g, s)
        # Planted feasible target with a tiny tolerance: no early exit, so
        # every call runs exactly --rounds rounds.
        gstar = rng.normal(size=g.num_edges)
        tgt = sys.apply(gstar / np.abs(gstar).sum())
        f = route_flow(s, q, g, b)
        steps = {
            "route": lambda: route_flow(s, q, g, b),
            "mwu": lambda: _backend.kernels.mwu_run(sys.R, sys.RT, sys.tails, sys.heads, sys.w, tgt, 0.25, 1e-12, args.rounds),
            "cancel": lambda: extract_map(g, q, inst, f),
        }
        saved = _backend.kernels
        for name, fn in steps.items():
            times = []
            for be in backends:
                _backend.use(be)
                times.append(best_of(fn, args.repeat))
            _backend.kernels = saved
            row = f"{n:>6} {g.num_edges:>9} {name:>8} " + " ".join(f"{x:>9.4f}s" for x in times)
            if len(times) == 2:
                row += f"  {times[0] / times[1]:>7.1f}x"
            print(row, flush=True)


if __name__ == "__main__":
    main()
