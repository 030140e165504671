"""Compare the numba kernels against the pure-Python/NumPy fallback.

Each backend runs in its own interpreter because the backend is fixed at
import time by FMSLOAD_DISABLE_NUMBA.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def worker(repeat: int) -> dict:
    from fmsload import _kernels
    from fmsload.instance import RandomParams, generate_random, paper_example
    from fmsload.solver import solve, solve_exhaustive

    paper = paper_example()
    small = generate_random(RandomParams(3, 3, 3, 6, 3), seed=11)
    out = {"backend": _kernels.BACKEND}

    def timed(label, fn):
        fn()  # warm-up (includes compilation for numba)
        best = float("inf")
        for _ in range(repeat):
            t = time.perf_counter()
            res = fn()
            best = min(best, time.perf_counter() - t)
        out[label] = {"seconds": best, "objective": res.objective}

    timed("solve_paper", lambda: solve(paper))
    timed("exhaustive_random_3x3", lambda: solve_exhaustive(small))
    timed("exhaustive_paper", lambda: solve_exhaustive(paper))
    return out


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.repeat)))
        return

    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, FMSLOAD_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(args.repeat)],
                              env=env, capture_output=True, text=True, check=True)
        doc = json.loads(proc.stdout.strip().splitlines()[-1])
        rows[doc.pop("backend")] = doc

    names = list(next(iter(rows.values())))
    print(f"{'case':<24}" + "".join(f"{b:>14}" for b in rows) + f"{'speedup':>10}  objectives agree")
    for n in names:
        secs = [rows[b][n]["seconds"] for b in rows]
        objs = {rows[b][n]["objective"] for b in rows}
        speed = secs[1] / secs[0] if len(secs) == 2 and secs[0] > 0 else float("nan")
        print(f"{n:<24}" + "".join(f"{s:>13.4f}s" for s in secs) + f"{speed:>9.1f}x  {len(objs) == 1}")


if __name__ == "__main__":
    main()
