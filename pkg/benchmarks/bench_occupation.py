"""Compare the compiled and pure-python occupation-basis kernels.

    python3 benchmarks/bench_occupation.py [--repeat 3]

For each (sites, particles) case the script times basis enumeration,
ranking of the whole basis and the annihilation-map construction with both
backends, checks that the outputs agree, and prints the speed-up.
"""
import argparse
import time

import numpy as np

from hartreelab.occupation import kernels, sector_dimension

CASES = [(8, 6), (16, 4), (32, 3), (32, 4), (32, 5)]


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_case(sites, particles, backend, repeat):
    k = kernels(backend)
    binom = k.binomial_table(sites + particles, particles)
    t_basis, occ = best_of(lambda: k.basis(sites, particles, binom), repeat)
    t_rank, ranks = best_of(lambda: np.asarray(k.ranks(occ, binom)), repeat)
    t_lower, entries = best_of(lambda: k.annihilation_entries(occ, binom), repeat)
    return {"basis": t_basis, "ranks": t_rank, "lowering": t_lower}, (np.asarray(occ), ranks, entries)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        kernels("compiled")
    except ImportError:
        print("compiled extension not built; only the python backend is available")
        return
    print(f"{'sites':>5} {'N':>3} {'dim':>9} {'stage':>9} {'python [s]':>11} {'compiled [s]':>13} {'speed-up':>9}")
    for sites, particles in CASES:
        py, py_out = run_case(sites, particles, "python", args.repeat)
        cc, cc_out = run_case(sites, particles, "compiled", args.repeat)
        assert np.array_equal(py_out[0], cc_out[0]), "basis mismatch"
        assert np.array_equal(py_out[1], cc_out[1]), "rank mismatch"
        ea, eb = ([np.asarray(x) for x in out[2]] for out in (py_out, cc_out))
        ia, ib = np.lexsort((ea[1], ea[0])), np.lexsort((eb[1], eb[0]))  # entry order is backend-specific
        for a, b in zip(ea, eb):
            assert np.allclose(a[ia], b[ib]), "annihilation map mismatch"
        dim = sector_dimension(sites, particles)
        for stage in py:
            print(f"{sites:>5} {particles:>3} {dim:>9} {stage:>9} {py[stage]:>11.4f} {cc[stage]:>13.4f} "
                  f"{py[stage] / cc[stage]:>8.1f}x")


if __name__ == "__main__":
    main()
