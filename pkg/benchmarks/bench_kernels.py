"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot paths (model + Jacobian evaluation, multimode
superposition) and a complete single-resonance fit with each backend.

Run:  python3 benchmarks/bench_kernels.py [--points N] [--repeats R]
"""

import argparse
import math
from time import perf_counter

import numpy as np

import sawres.kernels as kernels
from sawres import BackgroundModel, ModeParams, fit_resonance, synth_trace
from sawres import _kernels_py as kpy

try:
    from sawres import _kernels_cy as kcy
except ImportError:
    kcy = None


def timeit(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = perf_counter()
        fn()
        best = min(best, perf_counter() - t0)
    return best


def bench_backend(name, mod, freqs, args, f0s, qis, qes, repeats):
    t_model = timeit(lambda: mod.model_and_jacobian(freqs, *args), repeats)
    t_multi = timeit(lambda: mod.reflection_multi(freqs, f0s, qis, qes),
                     repeats)
    return name, t_model, t_multi


def bench_fit(mod, trace, repeats):
    saved = (kernels.model, kernels.model_and_jacobian)
    kernels.model = mod.model
    kernels.model_and_jacobian = mod.model_and_jacobian
    try:
        return timeit(lambda: fit_resonance(trace), repeats)
    finally:
        kernels.model, kernels.model_and_jacobian = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=20001)
    parser.add_argument("--repeats", type=int, default=7)
    ns = parser.parse_args()

    f0, qi, qe = 3.09e9, 7.47e4, 1.2e5
    ql = 1.0 / (1.0 / qi + 1.0 / qe)
    span = 20 * f0 / ql
    freqs = np.linspace(f0 - span / 2, f0 + span / 2, ns.points)
    args = (f0, qi, qe, 0.97, 0.0, 0.3, 3e-8, f0)
    f0s = f0 + 3.64e6 * np.arange(18.0)
    qis = np.full(18, qi)
    qes = np.full(18, qe)

    mode = ModeParams(f0=f0, qi=qi, qe=qe)
    bg = BackgroundModel(amp0=0.97, amp_slope=0.0, phase0=0.3, delay=3e-8,
                         f_ref=f0)
    trace = synth_trace([mode], bg,
                        np.linspace(f0 - 10 * f0 / ql, f0 + 10 * f0 / ql,
                                    1601),
                        noise_sigma=0.002, seed=3)

    backends = [("python", kpy)]
    if kcy is not None:
        backends.insert(0, ("cython", kcy))
    else:
        print("compiled kernels not available; timing python only")

    print(f"active backend: {kernels.BACKEND}")
    print(f"{ns.points} points, {ns.repeats} repeats, best-of shown\n")
    header = (f"{'backend':<8} {'model+jacobian':>15} "
              f"{'18-mode multi':>14} {'full fit':>10}")
    print(header)
    print("-" * len(header))
    rows = {}
    for name, mod in backends:
        _, t_model, t_multi = bench_backend(name, mod, freqs, args, f0s,
                                            qis, qes, ns.repeats)
        t_fit = bench_fit(mod, trace, ns.repeats)
        rows[name] = (t_model, t_multi, t_fit)
        print(f"{name:<8} {1e3 * t_model:>12.3f} ms {1e3 * t_multi:>11.3f}"
              f" ms {1e3 * t_fit:>7.2f} ms")

    if len(rows) == 2:
        c, p = rows["cython"], rows["python"]
        print(f"\nspeedup   {p[0] / c[0]:>12.1f} x  {p[1] / c[1]:>11.1f} x "
              f"{p[2] / c[2]:>8.1f} x")
        sc = kcy.model_and_jacobian(freqs, *args)
        sp = kpy.model_and_jacobian(freqs, *args)
        dev = max(
            float(np.max(np.abs(sc[0] - sp[0]))),
            float(np.max(np.abs(sc[1] - sp[1])) / np.max(np.abs(sp[1]))))
        print(f"max cython-python relative deviation: {dev:.3g}")


if __name__ == "__main__":
    main()
