"""Ensemble execution with per-path random streams and mergeable statistics.

Paths are grouped into fixed-size chunks that are simulated as one
vectorized batch. Every path owns the stream ``path_rng(seed, index)``, the
chunk layout depends only on ``chunk_size``, and chunk results are merged in
ascending order, so the number of worker processes never changes a result.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, NonFiniteState, NotStationaryInit, ShapeMismatch
from .integrate import SimConfig, _env_update, _mode_arrays, _reduced_update, path_rng
from .model import (EnvState, FullState, ModelSpec, env_to_full, full_to_env,
                    g_observable, h_observable, pi_sample, validate_model)
from .poly import PolyTestFn
from .serialize import config_hash

INIT_MODES = ("stationary", "fixed")
BLOCK_STEPS = 2048
DEFAULT_FIXED_BURN_IN = 50.0


class StreamingMoments:
    """Count, mean and co-moment matrix of a vector quantity.

    Batches are folded in with the pairwise (Chan et al.) update, so merging
    two accumulators gives the same result as accumulating the concatenated
    data, up to round-off.
    """

    def __init__(self, dim):
        self.dim = int(dim)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.comoment = np.zeros((self.dim, self.dim))

    def copy(self):
        out = StreamingMoments(self.dim)
        out.count = self.count
        out.mean = self.mean.copy()
        out.comoment = self.comoment.copy()
        return out

    def update(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 0 or (values.ndim == 1 and self.dim != 1):
            values = values.reshape(1, -1)
        elif values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[1] != self.dim:
            raise ShapeMismatch("expected rows of length %d, got shape %s"
                                % (self.dim, values.shape))
        if len(values) == 0:
            return self
        batch = StreamingMoments(self.dim)
        batch.count = len(values)
        batch.mean = values.mean(axis=0)
        centered = values - batch.mean
        batch.comoment = centered.T @ centered
        return self.merge(batch)

    def merge(self, other):
        if other.dim != self.dim:
            raise ShapeMismatch("cannot merge dimension %d into %d"
                                % (other.dim, self.dim))
        if other.count == 0:
            return self
        if self.count == 0:
            self.count = other.count
            self.mean = other.mean.copy()
            self.comoment = other.comoment.copy()
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.comoment = (self.comoment + other.comoment
                         + np.outer(delta, delta) * (self.count * other.count / n))
        self.mean = self.mean + delta * (other.count / n)
        self.count = n
        return self

    @property
    def covariance(self):
        if self.count < 2:
            return np.zeros((self.dim, self.dim))
        return self.comoment / (self.count - 1)

    @property
    def variance(self):
        return np.diag(self.covariance).copy()

    @property
    def stderr(self):
        if self.count == 0:
            return np.full(self.dim, np.nan)
        return np.sqrt(np.maximum(self.variance, 0.0) / self.count)

    @property
    def mean_covariance(self):
        """Covariance matrix of the estimator ``self.mean``."""
        return self.covariance / max(self.count, 1)


def update_moments(acc, values):
    return acc.copy().update(values)


def merge_moments(a, b):
    return a.copy().merge(b)


@dataclass
class EnsembleConfig:
    n_paths: int
    spec: ModelSpec
    sim: SimConfig
    observation_times: tuple
    init: str = "stationary"
    burn_in: float = None
    chunk_size: int = 500
    # autocovariance of an observable along each path; disabled when None
    autocov_max_lag: float = None
    autocov_lag_step: float = 0.1
    autocov_observable: object = "g"

    def validate(self):
        validate_model(self.spec)
        self.sim.validate()
        if self.init not in INIT_MODES:
            raise ConfigError("ensemble.init must be stationary or fixed, got %r"
                              % (self.init,))
        if self.sim.representation == "history":
            raise ConfigError("ensembles run the reduced or environment "
                              "representation, not history")
        if int(self.n_paths) < 2:
            raise ConfigError("ensemble.n_paths must be >= 2")
        if int(self.chunk_size) < 1:
            raise ConfigError("ensemble.chunk_size must be positive")
        times = list(self.observation_times)
        if not times:
            raise ConfigError("ensemble.observation_times is empty")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("ensemble.observation_times must increase")
        grid = self.sim.dt * self.sim.record_stride
        for t in times:
            k = t / grid
            if t < 0 or t > self.sim.t_end + 1e-9 or abs(k - round(k)) > 1e-6:
                raise ConfigError("observation time %g is not on the recording "
                                  "grid (spacing %g, horizon %g)"
                                  % (t, grid, self.sim.t_end))
        if self.autocov_max_lag is not None:
            m = self.autocov_lag_step / self.sim.dt
            if self.autocov_lag_step <= 0 or abs(m - round(m)) > 1e-6 or round(m) < 1:
                raise ConfigError("autocov_lag_step must be a positive multiple "
                                  "of dt")
            if self.autocov_max_lag > self.sim.t_end / 5 + 1e-12:
                raise ConfigError("autocov_max_lag must not exceed t_end/5")
        return self

    @property
    def burn_in_time(self):
        if self.burn_in is not None:
            return float(self.burn_in)
        return 0.0 if self.init == "stationary" else DEFAULT_FIXED_BURN_IN

    def to_dict(self):
        obs = self.autocov_observable
        return {
            "n_paths": int(self.n_paths),
            "spec": self.spec.to_dict(),
            "sim": asdict(self.sim),
            "observation_times": [float(t) for t in self.observation_times],
            "init": self.init,
            "burn_in": self.burn_in_time,
            "chunk_size": int(self.chunk_size),
            "autocov_max_lag": self.autocov_max_lag,
            "autocov_lag_step": self.autocov_lag_step,
            "autocov_observable": obs if isinstance(obs, str) else repr(obs),
        }

    @property
    def hash(self):
        return config_hash(self.to_dict())


@dataclass
class AutocovEstimate:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    # covariance of the lag estimates across paths, for integral error bars
    cov: np.ndarray = None
    n_paths: int = 0
    observable: str = "g"

    def to_dict(self):
        return {"lags": self.lags, "values": self.values, "stderr": self.stderr}


@dataclass
class EnsembleStats:
    times: np.ndarray
    x_samples: np.ndarray
    x_moments: StreamingMoments
    sq_moments: StreamingMoments
    autocov: AutocovEstimate = None
    seed: int = 0
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, times, x_samples, seed=0, config_hash=""):
        """Build statistics from an explicit ``(n_paths, n_times)`` array."""
        x = np.asarray(x_samples, dtype=float)
        times = np.asarray(times, dtype=float)
        if x.ndim != 2 or x.shape[1] != len(times):
            raise ShapeMismatch("x_samples must have shape (n_paths, %d)"
                                % len(times))
        xm = StreamingMoments(len(times)).update(x)
        sm = StreamingMoments(len(times)).update(x * x)
        return cls(times, x, xm, sm, seed=seed, config_hash=config_hash)

    @property
    def n_paths(self):
        return self.x_moments.count

    @property
    def mean_x(self):
        return self.x_moments.mean

    @property
    def mean_x_stderr(self):
        return self.x_moments.stderr

    @property
    def var_x(self):
        return self.x_moments.variance

    @property
    def cov(self):
        return self.x_moments.covariance

    @property
    def second_moment(self):
        return self.sq_moments.mean

    @property
    def second_moment_stderr(self):
        return self.sq_moments.stderr

    def samples_at(self, t):
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, t):
            raise KeyError("time %g was not observed" % t)
        return self.x_samples[:, idx]

    def to_dict(self):
        out = {
            "config_hash": self.config_hash,
            "seed": int(self.seed),
            "n_paths": int(self.n_paths),
            "times": self.times,
            "mean_x": self.mean_x,
            "var_x": self.var_x,
            "second_moment": self.second_moment,
            "second_moment_stderr": self.second_moment_stderr,
            "cov": self.cov,
        }
        if self.autocov is not None:
            out["autocov"] = self.autocov.to_dict()
        return out


def _observable_fn(observable, spec, centre):
    a = spec.coefficients
    if isinstance(observable, PolyTestFn):
        return lambda env: observable(env.stacked()) - centre
    if observable == "g":
        return lambda env: g_observable(env, a)
    if observable == "h":
        return lambda env: h_observable(env, a)
    raise ValueError("unknown observable %r" % (observable,))


def _observable_centre(config):
    obs = config.autocov_observable
    if not isinstance(obs, PolyTestFn):
        return 0.0
    # independent stream, kept away from the path streams
    rng = np.random.default_rng(np.random.SeedSequence(int(config.sim.seed),
                                                       spawn_key=(2 ** 32, 1)))
    env = pi_sample(rng, config.spec.coefficients, size=200_000)
    return float(np.mean(obs(env.stacked())))


def _lag_products(series, n_lags):
    """Per-row time averages ``mean_i o_i o_{i+k}`` for ``k < n_lags``."""
    m = series.shape[1]
    size = 1 << int(math.ceil(math.log2(2 * m)))
    f = np.fft.rfft(series, n=size, axis=1)
    acf = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n_lags]
    return acf / (m - np.arange(n_lags))


def _run_chunk(config, start, stop, centre):
    spec = config.spec
    sim = config.sim
    dt = sim.dt
    P = stop - start
    rngs = [path_rng(sim.seed, p) for p in range(start, stop)]
    a = spec.coefficients
    j, ja, jj = _mode_arrays(spec)
    env_rep = sim.representation == "environment"
    milstein = sim.scheme == "milstein"

    if config.init == "stationary":
        draws = [pi_sample(r, a) for r in rngs]
        env0 = EnvState(np.stack([d.c for d in draws]), np.stack([d.s for d in draws]))
    else:
        full = FullState(np.zeros(P), np.tile(spec.u0, (P, 1)),
                         np.tile(spec.v0, (P, 1)))
        env0 = full_to_env(full)
    x = np.zeros(P)
    if env_rep:
        c, s = env0.c.copy(), env0.s.copy()
    else:
        full = env_to_full(env0, x)
        u, v = full.u, full.v

    burn = int(round(config.burn_in_time / dt))
    N = int(round(sim.t_end / dt))
    total = burn + N
    obs_cols = {int(round(t / dt)): i for i, t in enumerate(config.observation_times)}
    x_obs = np.empty((P, len(obs_cols)))
    x_ref = np.zeros(P)

    track = config.autocov_max_lag is not None
    if track:
        obs_fn = _observable_fn(config.autocov_observable, spec, centre)
        lag_every = int(round(config.autocov_lag_step / dt))
        n_lags = int(round(config.autocov_max_lag / config.autocov_lag_step)) + 1
        series = np.empty((P, N // lag_every + 1))

    def current_env():
        if env_rep:
            return EnvState(c, s)
        return full_to_env(FullState(x, u, v))

    def record(step):
        rel = step - burn
        if rel < 0:
            return
        if rel == 0:
            x_ref[:] = x
        if rel in obs_cols:
            x_obs[:, obs_cols[rel]] = x - x_ref
        if track and rel % lag_every == 0:
            series[:, rel // lag_every] = obs_fn(current_env())

    record(0)
    sqdt = math.sqrt(dt)
    for block in range(0, total, BLOCK_STEPS):
        k = min(BLOCK_STEPS, total - block)
        dB = np.stack([r.standard_normal(k) for r in rngs]) * sqdt
        for i in range(k):
            if env_rep:
                c, s, g = _env_update(c, s, j, ja, jj, dB[:, i], dt, milstein)
                x = x + dB[:, i] + g * dt
            else:
                x, u, v = _reduced_update(x, u, v, j, ja, dB[:, i], dt)
            record(block + i + 1)
        state = (c, s) if env_rep else (u, v)
        bad = ~np.isfinite(x) | ~np.all(np.isfinite(state[0]), axis=-1) \
            | ~np.all(np.isfinite(state[1]), axis=-1)
        if bad.any():
            first = int(np.argmax(bad))
            t_fail = (block + k - burn) * dt
            raise NonFiniteState(
                "non-finite state on path %d by t=%.6g; reduce dt"
                % (start + first, t_fail), time=t_fail, path_index=start + first)

    T = len(config.observation_times)
    xm = StreamingMoments(T).update(x_obs)
    sm = StreamingMoments(T).update(x_obs * x_obs)
    am = None
    if track:
        am = StreamingMoments(n_lags).update(_lag_products(series, n_lags))
    return x_obs, xm, sm, am


def _chunk_bounds(config):
    size = int(config.chunk_size)
    return [(lo, min(lo + size, int(config.n_paths)))
            for lo in range(0, int(config.n_paths), size)]


def _run_chunk_args(args):
    return _run_chunk(*args)


def run_ensemble(config, workers=1):
    """Simulate ``n_paths`` independent paths and collect statistics.

    ``x`` is observed relative to its value at the end of burn-in, so the
    first observation at time 0 is exactly 0.
    """
    config.validate()
    centre = _observable_centre(config) if config.autocov_max_lag is not None else 0.0
    jobs = [(config, lo, hi, centre) for lo, hi in _chunk_bounds(config)]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(_run_chunk_args, jobs))
    else:
        results = [_run_chunk(*job) for job in jobs]

    T = len(config.observation_times)
    xm, sm = StreamingMoments(T), StreamingMoments(T)
    am = None
    for _, cx, cs, ca in results:
        xm.merge(cx)
        sm.merge(cs)
        if ca is not None:
            am = ca.copy() if am is None else am.merge(ca)
    samples = np.concatenate([r[0] for r in results], axis=0)

    autocov = None
    if am is not None:
        lags = np.arange(am.dim) * config.autocov_lag_step
        obs = config.autocov_observable
        autocov = AutocovEstimate(lags, am.mean.copy(), am.stderr,
                                  am.mean_covariance, am.count,
                                  obs if isinstance(obs, str) else repr(obs))
    return EnsembleStats(np.asarray(config.observation_times, dtype=float),
                         samples, xm, sm, autocov, seed=int(config.sim.seed),
                         config_hash=config.hash,
                         meta={"representation": config.sim.representation,
                               "init": config.init, "dt": config.sim.dt})


def stationary_autocov(config, observable="g", max_lag=None, lag_step=None,
                       workers=1):
    """Estimate ``E_pi[f(Z_u) f(Z_0)]`` on a lag grid from stationary paths.

    Each path contributes its time-averaged lag products; standard errors
    come from the spread across paths.
    """
    if config.init != "stationary":
        raise NotStationaryInit("autocovariance needs the stationary "
                                "initialisation")
    if max_lag is None:
        max_lag = config.sim.t_end / 5
    cfg = replace(config, autocov_max_lag=float(max_lag),
                  autocov_observable=observable,
                  autocov_lag_step=lag_step or config.autocov_lag_step)
    return run_ensemble(cfg, workers=workers).autocov


def long_run_samples(spec, dt, horizon, n_paths, seed, spacing, burn_in=0.0,
                     representation="environment", scheme="euler"):
    """Environment states from ``n_paths`` independent runs started at
    ``(u0, v0)``, taken every ``spacing`` time units after ``burn_in``.

    Returns an :class:`EnvState` whose arrays have shape ``(m, n)``.
    """
    validate_model(spec)
    j, ja, jj = _mode_arrays(spec)
    rngs = [path_rng(seed, p) for p in range(int(n_paths))]
    P = len(rngs)
    full = FullState(np.zeros(P), np.tile(spec.u0, (P, 1)), np.tile(spec.v0, (P, 1)))
    env = full_to_env(full)
    c, s = env.c, env.s
    x, u, v = full.x, full.u, full.v
    every = max(int(math.ceil(spacing / dt - 1e-9)), 1)
    burn = int(round(burn_in / dt))
    total = int(round(horizon / dt))
    milstein = scheme == "milstein"
    out_c, out_s = [], []
    sqdt = math.sqrt(dt)
    for block in range(0, total, BLOCK_STEPS):
        k = min(BLOCK_STEPS, total - block)
        dB = np.stack([r.standard_normal(k) for r in rngs]) * sqdt
        for i in range(k):
            if representation == "environment":
                c, s, _ = _env_update(c, s, j, ja, jj, dB[:, i], dt, milstein)
            else:
                x, u, v = _reduced_update(x, u, v, j, ja, dB[:, i], dt)
            step = block + i + 1
            if step > burn and (step - burn) % every == 0:
                cur = EnvState(c, s) if representation == "environment" \
                    else full_to_env(FullState(x, u, v))
                out_c.append(cur.c.copy())
                out_s.append(cur.s.copy())
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))
                and np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NonFiniteState("non-finite state by t=%.6g; reduce dt"
                                 % ((block + k) * dt), time=(block + k) * dt)
    if not out_c:
        return EnvState(np.empty((0, spec.n)), np.empty((0, spec.n)))
    # path-major order: all samples of path 0, then path 1, ...
    c_arr = np.stack(out_c, axis=1).reshape(-1, spec.n)
    s_arr = np.stack(out_s, axis=1).reshape(-1, spec.n)
    return EnvState(c_arr, s_arr)
