"""Time stepping for the three equivalent descriptions of the process.

* ``history``: the original equation, with the self-interaction integral
  evaluated as a left Riemann sum over the stored path (cost grows with t).
* ``reduced``: the Markov lift ``(x, u, v)``; constant cost per step.
* ``environment``: the autonomous ``(c, s)`` system; ``x`` is rebuilt as
  ``B_t + int g dt``.

All three can be driven by the same Brownian increments, which is what the
coupling run uses to cross-check them pathwise.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteState
from .model import (TWO_PI, EnvState, FullState, eval_F_prime, eval_G_prime,
                    full_to_env, validate_model)

REPRESENTATIONS = ("history", "reduced", "environment")
SCHEMES = ("euler", "milstein")


@dataclass
class SimConfig:
    dt: float = 0.01
    t_end: float = 1.0
    seed: int = 0
    representation: str = "reduced"
    record_stride: int = 1
    # only affects the environment representation
    scheme: str = "euler"

    def validate(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("sim.dt must be positive, got %r" % (self.dt,))
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("sim.t_end must be >= 0, got %r" % (self.t_end,))
        if self.t_end > 0 and self.dt > self.t_end:
            raise ConfigError("sim.dt=%g exceeds sim.t_end=%g"
                              % (self.dt, self.t_end))
        if self.representation not in REPRESENTATIONS:
            raise ConfigError("sim.representation must be one of %s, got %r"
                              % ("/".join(REPRESENTATIONS), self.representation))
        if self.scheme not in SCHEMES:
            raise ConfigError("sim.scheme must be one of %s, got %r"
                              % ("/".join(SCHEMES), self.scheme))
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError("sim.record_stride must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("sim.seed must fit in 64 unsigned bits")
        if self.n_steps > np.iinfo(np.int64).max // 4:
            raise ConfigError("too many steps")
        return self

    @property
    def n_steps(self):
        return n_steps(self.t_end, self.dt)


def n_steps(t_end, dt):
    """``ceil(t_end / dt)``, forgiving round-off when the ratio is integral."""
    ratio = t_end / dt
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


@dataclass
class Trajectory:
    """Recorded path. ``states[i, 0]`` holds u or c, ``states[i, 1]`` v or s."""

    times: np.ndarray
    x: np.ndarray
    states: np.ndarray
    dB: np.ndarray
    representation: str
    dt: float
    record_stride: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def brownian(self):
        """Running sum of the increments, i.e. ``B`` on the recording grid."""
        B = np.concatenate([[0.0], np.cumsum(self.dB)])
        return B[::self.record_stride][:len(self.times)]

    def state(self, i):
        if self.states is None:
            raise ValueError("history trajectories carry no (u, v) state")
        if self.representation == "environment":
            return EnvState(self.states[i, 0], self.states[i, 1])
        return FullState(self.x[i], self.states[i, 0], self.states[i, 1])


def path_rng(seed, index=0):
    """Independent stream for path ``index``; depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed),
                                                        spawn_key=(int(index),)))


def brownian_increments(rng, dt, steps):
    return rng.standard_normal(int(steps)) * math.sqrt(dt)


def _check_finite(time, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteState("non-finite state at t=%.6g; reduce dt" % time,
                                 time=time)


def _reduced_update(x, u, v, j, ja, dB, dt):
    theta = j * np.mod(x, TWO_PI)[..., None]
    sn, cs = np.sin(theta), np.cos(theta)
    drift = np.sum(ja * (sn * u - cs * v), axis=-1)
    return x + dB + drift * dt, u + cs * dt, v + sn * dt


def _env_update(c, s, j, ja, jj, dB, dt, milstein=False):
    g = np.sum(ja * s, axis=-1)
    dB = np.asarray(dB, dtype=float)
    dY = (dB + g * dt)[..., None]
    c_new = c - j * s * dY + (1.0 - 0.5 * jj * c) * dt
    s_new = s + j * c * dY - 0.5 * jj * s * dt
    if milstein:
        # derivative of the rotation noise along itself is -j^2 z
        corr = -0.5 * jj * (dB[..., None] ** 2 - dt)
        c_new = c_new + corr * c
        s_new = s_new + corr * s
    return c_new, s_new, g


def _mode_arrays(spec):
    j = spec.modes
    return j, j * spec.coefficients, j * j


def step_reduced(state, spec, dB, dt):
    """One Euler-Maruyama step of the lifted system."""
    j, ja, _ = _mode_arrays(spec)
    x, u, v = _reduced_update(state.x, state.u, state.v, j, ja, dB, dt)
    _check_finite(float("nan"), x, u, v)
    return FullState(x, u, v)


def step_env(state, spec, dB, dt, scheme="euler"):
    """One step of the environment SDE. Never looks at ``x``.

    ``scheme="milstein"`` adds the single-noise Milstein correction
    ``-j^2/2 (dB^2 - dt) (c_j, s_j)``, which restores strong order one for
    this multiplicative noise.
    """
    if scheme not in SCHEMES:
        raise ValueError("unknown scheme %r" % (scheme,))
    j, ja, jj = _mode_arrays(spec)
    c, s, _ = _env_update(state.c, state.s, j, ja, jj, dB, dt,
                          milstein=scheme == "milstein")
    _check_finite(float("nan"), c, s)
    return EnvState(c, s)


def _history_update(x, path, spec, dB, dt):
    interaction = np.sum(eval_F_prime(x - path, spec.a)) * dt if path.size else 0.0
    return x + dB - (eval_G_prime(x, spec) + interaction) * dt


def step_history(x, path, spec, dB, dt):
    """One step of the original equation; ``path`` holds earlier grid values."""
    x_new = float(_history_update(x, np.asarray(path, dtype=float), spec, dB, dt))
    _check_finite(float("nan"), x_new)
    return x_new


def _integrate(spec, representation, dB, dt, stride=1, scheme="euler"):
    """Drive one path with the given increments, recording every ``stride``."""
    steps = len(dB)
    n_rec = steps // stride + 1
    times = np.arange(n_rec) * stride * dt
    xs = np.empty(n_rec)
    states = None if representation == "history" else np.empty((n_rec, 2, spec.n))
    j, ja, jj = _mode_arrays(spec)
    u0 = np.asarray(spec.u0, dtype=float)
    v0 = np.asarray(spec.v0, dtype=float)

    if representation == "reduced":
        x, u, v = np.float64(0.0), u0.copy(), v0.copy()
        xs[0], states[0, 0], states[0, 1] = x, u, v
        for i in range(steps):
            x, u, v = _reduced_update(x, u, v, j, ja, dB[i], dt)
            if (i + 1) % stride == 0:
                k = (i + 1) // stride
                _check_finite((i + 1) * dt, x, u, v)
                xs[k], states[k, 0], states[k, 1] = x, u, v
        _check_finite(steps * dt, x, u, v)
    elif representation == "environment":
        env = full_to_env(FullState(0.0, u0, v0))
        c, s, x = env.c, env.s, 0.0
        milstein = scheme == "milstein"
        xs[0], states[0, 0], states[0, 1] = x, c, s
        for i in range(steps):
            c, s, g = _env_update(c, s, j, ja, jj, dB[i], dt, milstein)
            x = x + dB[i] + g * dt
            if (i + 1) % stride == 0:
                k = (i + 1) // stride
                _check_finite((i + 1) * dt, c, s)
                xs[k], states[k, 0], states[k, 1] = x, c, s
        _check_finite(steps * dt, c, s)
    elif representation == "history":
        path = np.empty(steps + 1)
        path[0] = 0.0
        xs[0] = 0.0
        for i in range(steps):
            path[i + 1] = _history_update(path[i], path[:i], spec, dB[i], dt)
            if (i + 1) % stride == 0:
                xs[(i + 1) // stride] = path[i + 1]
        _check_finite(steps * dt, path)
    else:
        raise ValueError("unknown representation %r" % (representation,))
    return times, xs, states


def simulate(spec, config, rng=None):
    validate_model(spec)
    config.validate()
    if rng is None:
        rng = path_rng(config.seed, 0)
    dB = brownian_increments(rng, config.dt, config.n_steps)
    # blow-ups are reported through NonFiniteState, not numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        times, xs, states = _integrate(spec, config.representation, dB, config.dt,
                                       int(config.record_stride), config.scheme)
    return Trajectory(times, xs, states, dB, config.representation, config.dt,
                      int(config.record_stride),
                      meta={"seed": int(config.seed), "scheme": config.scheme})


@dataclass
class ConsistencyReport:
    dts: list
    d_redenv: list
    d_hist: list
    horizon: float
    seed: int
    scheme: str
    redenv_series: dict = field(default_factory=dict, repr=False)

    @property
    def redenv_ratios(self):
        d = self.d_redenv
        return [d[i + 1] / d[i] for i in range(len(d) - 1)]

    def to_dict(self):
        return {"dts": list(self.dts), "d_redenv": list(self.d_redenv),
                "d_hist": list(self.d_hist), "redenv_ratios": self.redenv_ratios,
                "horizon": self.horizon, "seed": self.seed,
                "scheme": self.scheme}


def coupled_consistency_run(spec, horizon, dt_list, seed, scheme="milstein"):
    """Run history, reduced and environment steppers on one Brownian path.

    The path is generated at the finest step; coarser increments are sums of
    fine ones. ``d_redenv`` is the sup over grid times of the largest
    component gap between the transformed reduced state and the environment
    state; ``d_hist`` is the sup gap between the two displacement paths.
    """
    validate_model(spec)
    dts = sorted((float(d) for d in dt_list), reverse=True)
    fine = dts[-1]
    n_fine = n_steps(horizon, fine)
    if abs(n_fine * fine - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError("dt=%g does not divide the horizon %g" % (fine, horizon))
    dB_fine = brownian_increments(path_rng(seed, 0), fine, n_fine)

    d_redenv, d_hist, series = [], [], {}
    for dt in dts:
        k = round(dt / fine)
        if abs(k * fine - dt) > 1e-9 * dt or n_fine % k:
            raise ValueError("dt=%g is not a multiple of %g dividing the horizon"
                             % (dt, fine))
        dB = dB_fine.reshape(-1, k).sum(axis=1)
        _, x_red, st_red = _integrate(spec, "reduced", dB, dt)
        _, x_env, st_env = _integrate(spec, "environment", dB, dt, scheme=scheme)
        _, x_hist, _ = _integrate(spec, "history", dB, dt)
        env_from_red = full_to_env(FullState(x_red, st_red[:, 0], st_red[:, 1]))
        gap = np.maximum(np.abs(env_from_red.c - st_env[:, 0]),
                         np.abs(env_from_red.s - st_env[:, 1])).max(axis=-1)
        series[dt] = gap
        d_redenv.append(float(gap.max()))
        d_hist.append(float(np.max(np.abs(x_hist - x_red))))
    return ConsistencyReport(dts, d_redenv, d_hist, float(horizon), int(seed),
                             scheme, series)


def trajectory_header(traj):
    n = 0 if traj.states is None else traj.states.shape[-1]
    names = ("c", "s") if traj.representation == "environment" else ("u", "v")
    cols = ["time", "x"]
    for k in range(1, n + 1):
        cols += ["%s%d" % (names[0], k), "%s%d" % (names[1], k)]
    return cols


def write_trajectory_csv(traj, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(traj))
        for i, t in enumerate(traj.times):
            row = [t, traj.x[i]]
            if traj.states is not None:
                for k in range(traj.states.shape[-1]):
                    row += [traj.states[i, 0, k], traj.states[i, 1, k]]
            w.writerow(["%.17g" % v for v in row])


def read_trajectory_csv(path):
    """Return ``(header, data)`` with ``data`` a float array of rows."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
