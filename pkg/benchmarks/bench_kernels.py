"""Compiled kernels versus the numpy fallback.

Run ``python benchmarks/bench_kernels.py``. Kernel timings call both
implementations directly. The end-to-end rows run a fit and a valuation in a
subprocess per backend, selected with ``SPDVAL_PURE_PYTHON``.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from spdval import _kernels
from spdval._kernels import _pykernels
from spdval.distributions import antiderivative

END_TO_END = """
import json, time
from spdval import BACKEND
from spdval.models import LognormalMarket
from spdval.option_surface import fit_call_curve, state_price_density
from spdval.valuation import ValuationInputs, value_closed_form, finite_portfolio_value
m = LognormalMarket(100.0, 0.02, 0.2, 1.0, mu=0.06)
t0 = time.perf_counter()
for _ in range({reps}):
    spd = state_price_density(fit_call_curve(m.quotes(), m.context))
    inputs = ValuationInputs(m.physical(2.0), m.physical(), spd, m.context)
    value_closed_form(inputs)
    finite_portfolio_value(inputs, 10000)
print(json.dumps({{"backend": BACKEND, "seconds": (time.perf_counter() - t0) / {reps}}}))
"""


def _cases(rng):
    pieces = 200
    breaks = np.cumsum(rng.uniform(0.1, 1.0, pieces + 1))
    coef = rng.normal(size=(4, pieces))
    dens = np.vstack([np.zeros(pieces), rng.uniform(0.1, 2.0, pieces)])
    mono = antiderivative(breaks, dens)
    x = np.sort(rng.uniform(breaks[0], breaks[-1], 100_000))
    y = rng.uniform(0.0, _pykernels.ppoly_eval(breaks, mono, breaks[-1:])[0], 20_000)
    samples = np.sort(rng.normal(size=5_000))
    grid = np.linspace(-5, 5, 4_000)
    return {
        "ppoly_eval": lambda k: k.ppoly_eval(breaks, coef, x, 0),
        "ppoly_inverse": lambda k: k.ppoly_inverse(breaks, mono, y),
        "gauss_kde": lambda k: k.gauss_kde(samples, 0.2, grid),
    }


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def _end_to_end(pure, reps):
    env = dict(os.environ, SPDVAL_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END.format(reps=reps)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--reps", type=int, default=3, help="end-to-end repetitions")
    args = parser.parse_args(argv)

    if _kernels._ckernels is None:
        print("compiled extension not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, call in _cases(rng).items():
        py = _best(lambda: call(_pykernels), args.repeat)
        cy = _best(lambda: call(_kernels._ckernels), args.repeat)
        np.testing.assert_allclose(call(_kernels._ckernels), call(_pykernels), rtol=1e-9, atol=1e-12)
        print(f"{name:<16}{py * 1e3:>14.2f}{cy * 1e3:>14.2f}{py / cy:>10.1f}x")
    py = _end_to_end(True, args.reps)
    cy = _end_to_end(False, args.reps)
    print(f"{'fit + value':<16}{py['seconds'] * 1e3:>14.2f}{cy['seconds'] * 1e3:>14.2f}"
          f"{py['seconds'] / cy['seconds']:>10.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
