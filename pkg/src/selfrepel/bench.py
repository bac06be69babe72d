"""Per-step cost of the three steppers as the horizon grows.

The history stepper re-sums the whole past at every step, so its per-step
cost grows linearly with the horizon; the Markov steppers do O(n) work per
step regardless of how long the path has run.
"""

import time

from .integrate import REPRESENTATIONS, _integrate, brownian_increments, n_steps, path_rng

HISTORY_MIN_RATIO = 5.0
FLAT_RATIO_RANGE = (0.5, 2.0)


def time_stepper(spec, representation, dt, horizon, seed=0, repeats=3):
    """Best-of-``repeats`` wall time for one path, plus the step count."""
    steps = n_steps(horizon, dt)
    dB = brownian_increments(path_rng(seed, 0), dt, steps)
    best = float("inf")
    for _ in range(max(int(repeats), 1)):
        start = time.perf_counter()
        _integrate(spec, representation, dB, dt)
        best = min(best, time.perf_counter() - start)
    return best, steps


def run_bench(spec, dt=0.01, horizons=(10.0, 50.0, 250.0), repeats=3, seed=0):
    entries = []
    for rep in REPRESENTATIONS:
        for T in horizons:
            seconds, steps = time_stepper(spec, rep, dt, T, seed, repeats)
            entries.append({"representation": rep, "horizon": float(T),
                            "steps": int(steps), "seconds": seconds,
                            "per_step_seconds": seconds / steps})
    lo_h, hi_h = min(horizons), max(horizons)
    ratios, checks = {}, {}
    for rep in REPRESENTATIONS:
        cost = {e["horizon"]: e["per_step_seconds"] for e in entries
                if e["representation"] == rep}
        r = cost[float(hi_h)] / cost[float(lo_h)]
        ratios[rep] = r
        if rep == "history":
            checks[rep] = bool(r > HISTORY_MIN_RATIO)
        else:
            checks[rep] = bool(FLAT_RATIO_RANGE[0] <= r <= FLAT_RATIO_RANGE[1])
    return {"dt": float(dt), "horizons": [float(h) for h in horizons],
            "repeats": int(repeats), "entries": entries,
            "ratio_horizons": [float(hi_h), float(lo_h)],
            "per_step_ratios": ratios, "checks": checks,
            "all_pass": all(checks.values())}
