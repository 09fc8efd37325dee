"""Compare the numba kernels with the pure numpy fallback.

Two levels are timed:

* the sparse product and reduction kernels on tables taken from the
  square of the truncated NLS Hamiltonian, with both backends in one process;
* an end-to-end polynomial workload (map inversion, composition and an
  action bracket check) run in a subprocess per backend, so the environment
  flag selects the backend at import time exactly as in production.

Usage: ``python benchmarks/bench_kernels.py [--J 3] [--repeat 5]``
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from nlsbirkhoff import kernels
from nlsbirkhoff._accel import ENV_FLAG
from nlsbirkhoff.dynamics import nls_hamiltonian_poly
from nlsbirkhoff.polymap import PRUNE_TOL, Ring

WORKLOAD = r"""
import json, time
from nlsbirkhoff import backend_name
from nlsbirkhoff.polymap import PolyMap, Ring, ScalarPoly, compose, invert_near_identity
from nlsbirkhoff.psitaylor import verify_involution
from nlsbirkhoff.dynamics import nls_hamiltonian_poly

J, cap = {J}, 6
ring = Ring(J, cap)
H = nls_hamiltonian_poly(ring)
slots = [ScalarPoly.var(ring, *ring.label(v)) for v in range(ring.nvar)]
slots = [s + H.deriv(ring.swap(v)).homogeneous(3).scale(0.01) for v, s in enumerate(slots)]
Phi = PolyMap(ring, slots)
compose(H, Phi, cap)  # warm-up, includes jit compilation
t0 = time.perf_counter()
inv = invert_near_identity(Phi, 5)
compose(H, inv, cap)
verify_involution(Phi, 4)
print(json.dumps({{"backend": backend_name(), "seconds": time.perf_counter() - t0}}))
"""


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def micro(J: int, repeat: int) -> dict:
    ring = Ring(J, 12)
    H = nls_hamiltonian_poly(ring)
    P = H.mul(H)
    a = (P.keys, P.coefs, P.degs)
    # warm up the jit so compilation is not timed
    kernels.mul_terms(*a, *a, 12, PRUNE_TOL, use_numba=True)
    out = {"terms": int(P.nterms)}
    for flag, name in ((True, "numba"), (False, "numpy")):
        out[f"mul_{name}"] = best_of(lambda: kernels.mul_terms(*a, *a, 12, PRUNE_TOL, use_numba=flag),
                                     repeat)
    k, c, d = kernels.mul_terms(*a, *a, 12, PRUNE_TOL, use_numba=False)
    rng = np.random.default_rng(0)
    perm = rng.permutation(np.concatenate([np.arange(len(k))] * 3))
    raw = (k[perm], c[perm], d[perm])
    kernels.reduce_terms(*raw, PRUNE_TOL, use_numba=True)
    for flag, name in ((True, "numba"), (False, "numpy")):
        out[f"reduce_{name}"] = best_of(lambda: kernels.reduce_terms(*raw, PRUNE_TOL, use_numba=flag),
                                        repeat)
    return out


def end_to_end(J: int) -> dict:
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, **{ENV_FLAG: flag})
        r = subprocess.run([sys.executable, "-c", WORKLOAD.format(J=J)], env=env,
                           capture_output=True, text=True, check=True)
        res = json.loads(r.stdout.strip().splitlines()[-1])
        out[res["backend"]] = res["seconds"]
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--J", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    m = micro(args.J, args.repeat)
    print(f"sparse kernels, J={args.J}, {m['terms']} terms per factor (best of {args.repeat})")
    for op in ("mul", "reduce"):
        nb, npy = m[f"{op}_numba"], m[f"{op}_numpy"]
        print(f"  {op:7s} numba {nb * 1e3:9.2f} ms   numpy {npy * 1e3:9.2f} ms   speedup {npy / nb:6.1f}x")
    e = end_to_end(args.J)
    print(f"end to end (invert, compose, bracket check), J={args.J}")
    print(f"  numba {e['numba']:7.2f} s   numpy {e['numpy']:7.2f} s   speedup {e['numpy'] / e['numba']:6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
