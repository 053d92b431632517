"""Time the compiled path kernel against the numpy fallback.

Usage: ``python3 benchmarks/bench_kernel.py [--paths N] [--repeat R]``
"""
import argparse
import time

import numpy as np

from wwrcva import mc
from wwrcva.affine import ShiftedAffineModel, parameter_set
from wwrcva.exposure import forward, swap


def bench(backend, plan, model, spec, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        res = mc.run(plan, model, spec, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = mc.available_backends()
    model = ShiftedAffineModel(parameter_set(2))
    print(f"backends: {', '.join(backends)}; {args.paths} paths x 300 steps, best of {args.repeat}")
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, spec, scheme in (("forward, full truncation", forward(0.08, 3.0), "full_truncation"),
                               ("swap, reflected", swap(0.08, 0.01, 3.0), "reflected")):
        plan = mc.SimulationPlan.uniform(3.0, 0.01, n_paths=args.paths, rho=0.5, scheme=scheme)
        times, means = {}, {}
        for b in backends:
            times[b], res = bench(b, plan, model, spec, args.repeat)
            means[b] = res.mean("vpos_w")
        if len(backends) > 1:
            np.testing.assert_allclose(means["cython"], means["python"], rtol=1e-9, atol=1e-15)
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<28}" + "".join(f"{times[b]:>11.3f}s" for b in backends) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
