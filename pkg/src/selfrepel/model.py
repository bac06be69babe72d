"""Model definition, state transforms, invariant law and generator.

The interaction potential is ``F(x) = sum_k a_k cos(k x)``. The process
``X`` is lifted to the Markov state ``(x, u, v)`` where ``u_j, v_j`` are the
running cosine/sine occupation integrals, and further reduced to the
environment ``(c, s)`` seen from the particle by rotating each mode by
``j * x``.

All array-valued functions broadcast over leading batch dimensions: per-mode
arrays have shape ``(..., n)`` and scalars such as ``x`` have shape ``(...)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonPositiveCoefficient

TWO_PI = 2.0 * np.pi
MAX_MODES = 64
MIN_COEFFICIENT = 1e-12

GENERATOR_VARIANTS = ("ito-corrected", "as-printed")


@dataclass
class ModelSpec:
    """Interaction coefficients ``a`` and initial environment ``(u0, v0)``."""

    n: int
    a: tuple
    u0: tuple = None
    v0: tuple = None

    def __post_init__(self):
        self.a = tuple(float(x) for x in np.atleast_1d(self.a))
        if self.u0 is None:
            self.u0 = (0.0,) * int(self.n)
        if self.v0 is None:
            self.v0 = (0.0,) * int(self.n)
        self.u0 = tuple(float(x) for x in np.atleast_1d(self.u0))
        self.v0 = tuple(float(x) for x in np.atleast_1d(self.v0))

    @classmethod
    def canonical(cls):
        return cls(1, (1.0,))

    @property
    def modes(self):
        return np.arange(1, self.n + 1, dtype=float)

    @property
    def coefficients(self):
        return np.asarray(self.a, dtype=float)

    def to_dict(self):
        return {"n": self.n, "a": list(self.a), "u0": list(self.u0),
                "v0": list(self.v0)}

    @classmethod
    def from_dict(cls, data):
        """Parse a ``model`` configuration section and validate it."""
        data = dict(data)
        unknown = set(data) - {"n", "a", "u0", "v0"}
        if unknown:
            raise DimensionMismatch("unknown model keys: %s"
                                    % ", ".join(sorted(unknown)))
        if "a" not in data:
            raise DimensionMismatch("model.a is required")
        a = list(np.atleast_1d(data["a"]))
        n = data.get("n", len(a))
        spec = cls(n, a, data.get("u0", [0.0] * len(a)),
                   data.get("v0", [0.0] * len(a)))
        return validate_model(spec)


@dataclass
class FullState:
    """Markov lift ``(X_t, U(t), V(t))``; ``x`` is the unwrapped displacement."""

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)


@dataclass
class EnvState:
    """Environment coordinates ``(C(t), S(t))`` seen from the particle."""

    c: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.s = np.asarray(self.s, dtype=float)

    def stacked(self):
        """Interleave to shape ``(..., 2n)`` in the order c1, s1, c2, s2, ..."""
        z = np.empty(self.c.shape[:-1] + (2 * self.c.shape[-1],))
        z[..., 0::2] = self.c
        z[..., 1::2] = self.s
        return z


def validate_model(spec):
    n = spec.n
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionMismatch("n must be a positive integer, got %r" % (n,))
    if n > MAX_MODES:
        raise DimensionMismatch("n=%d exceeds the supported maximum of %d"
                                % (n, MAX_MODES))
    for name in ("a", "u0", "v0"):
        if len(getattr(spec, name)) != n:
            raise DimensionMismatch("%s has length %d but n=%d"
                                    % (name, len(getattr(spec, name)), n))
    for k, ak in enumerate(spec.a, start=1):
        if not np.isfinite(ak) or ak <= MIN_COEFFICIENT:
            raise NonPositiveCoefficient(
                "a_%d = %r: coefficients must satisfy a_k > 0 (strictly, and "
                "above %g)" % (k, ak, MIN_COEFFICIENT))
    for name in ("u0", "v0"):
        if not np.all(np.isfinite(getattr(spec, name))):
            raise DimensionMismatch("%s contains non-finite values" % name)
    return spec


def _modes_for(a):
    a = np.asarray(a, dtype=float)
    return np.arange(1, a.shape[-1] + 1, dtype=float), a


def eval_F_prime(x, a):
    """``F'(x) = -sum_k k a_k sin(k x)``."""
    j, a = _modes_for(a)
    x = np.asarray(x, dtype=float)
    theta = np.mod(x, TWO_PI)[..., None]
    return -np.sum(j * a * np.sin(j * theta), axis=-1)


def eval_G_prime(x, spec):
    """Derivative of the static potential implied by ``(u0, v0)``.

    ``G(x) = sum_k a_k (u0_k cos(kx) + v0_k sin(kx))``, which is what makes
    the history equation agree with the lifted system started at ``(u0, v0)``.
    """
    j, a = _modes_for(spec.a)
    u0 = np.asarray(spec.u0)
    v0 = np.asarray(spec.v0)
    theta = np.mod(np.asarray(x, dtype=float), TWO_PI)[..., None]
    return np.sum(j * a * (v0 * np.cos(j * theta) - u0 * np.sin(j * theta)),
                  axis=-1)


def full_to_env(state):
    j = np.arange(1, state.u.shape[-1] + 1, dtype=float)
    theta = j * np.mod(state.x, TWO_PI)[..., None]
    cs, sn = np.cos(theta), np.sin(theta)
    return EnvState(state.u * cs + state.v * sn, state.u * sn - state.v * cs)


def env_to_full(env, x):
    # the forward map is a reflection per mode, hence its own inverse
    x = np.asarray(x, dtype=float)
    j = np.arange(1, env.c.shape[-1] + 1, dtype=float)
    theta = j * np.mod(x, TWO_PI)[..., None]
    cs, sn = np.cos(theta), np.sin(theta)
    u = env.c * cs + env.s * sn
    v = env.c * sn - env.s * cs
    return FullState(np.broadcast_to(x, u.shape[:-1]).copy(), u, v)


def reduced_drift(state, a):
    """Drift of ``X`` in the lifted system: ``sum_j j a_j (sin(jx) u_j - cos(jx) v_j)``."""
    j, a = _modes_for(a)
    theta = j * np.mod(state.x, TWO_PI)[..., None]
    return np.sum(j * a * (np.sin(theta) * state.u - np.cos(theta) * state.v),
                  axis=-1)


def g_observable(env, a):
    j, a = _modes_for(a)
    return np.sum(j * a * env.s, axis=-1)


def h_observable(env, a):
    a = np.asarray(a, dtype=float)
    return np.sum(a * env.c, axis=-1)


def eta_eval(env, a, x):
    """Potential seen from the particle, evaluated at offset ``x``."""
    j, a = _modes_for(a)
    theta = j * np.mod(np.asarray(x, dtype=float), TWO_PI)[..., None]
    return np.sum(a * (env.c * np.cos(theta) - env.s * np.sin(theta)), axis=-1)


def pi_variances(a):
    j, a = _modes_for(a)
    return 1.0 / (a * j * j)


def pi_sample(rng, a, size=None):
    """Draw from the invariant product Gaussian. ``size`` adds a batch axis."""
    sd = np.sqrt(pi_variances(a))
    shape = (len(sd),) if size is None else (int(size), len(sd))
    c = rng.standard_normal(shape) * sd
    s = rng.standard_normal(shape) * sd
    return EnvState(c, s)


def pi_log_density(env, a):
    j, a = _modes_for(a)
    phi = 0.5 * np.sum(a * j * j * (env.c ** 2 + env.s ** 2), axis=-1)
    log_norm = np.sum(np.log(TWO_PI / (a * j * j)))
    return -phi - log_norm


def _derivative_cache(f):
    grad = [f.deriv(i) for i in range(f.nvars)]
    hess = {}
    for p in range(f.nvars):
        if grad[p].is_zero():
            continue
        for q in range(p, f.nvars):
            d = grad[p].deriv(q)
            if not d.is_zero():
                hess[(p, q)] = d
    return grad, hess


def apply_generator(f, env, a, variant="ito-corrected"):
    """Evaluate ``(G f)(c, s)`` for a polynomial test function.

    ``ito-corrected`` is the generator of the environment SDE obtained by Itô's
    formula: one Brownian motion drives every mode through the diffusion
    vector ``(-j s_j, j c_j)``, with drift ``1 - j s_j g - j^2 c_j / 2`` on
    ``c_j`` and ``j c_j g - j^2 s_j / 2`` on ``s_j``.

    ``as-printed`` evaluates the closed-form operator exactly as it is usually
    quoted: it lacks the ``-j^2/2 (c_j d/dc_j + s_j d/ds_j)`` terms and carries
    a minus sign on the mixed ``k != j`` second-order terms. It does not
    annihilate the invariant law and is kept only to exhibit that.
    """
    if variant not in GENERATOR_VARIANTS:
        raise ValueError("unknown generator variant %r" % (variant,))
    j, a = _modes_for(a)
    n = len(j)
    if f.nvars != 2 * n:
        raise ValueError("test function has %d variables, model needs %d"
                         % (f.nvars, 2 * n))
    z = env.stacked()
    c, s = env.c, env.s
    g = np.sum(j * a * s, axis=-1)
    grad, hess = _derivative_cache(f)

    def d1(p):
        return grad[p](z) if not grad[p].is_zero() else 0.0

    def d2(p, q):
        key = (min(p, q), max(p, q))
        return hess[key](z) if key in hess else 0.0

    out = np.zeros(z.shape[:-1])
    if variant == "ito-corrected":
        sigma = np.empty_like(z)
        sigma[..., 0::2] = -j * s
        sigma[..., 1::2] = j * c
        for (p, q), hpq in hess.items():
            weight = 1.0 if p == q else 2.0
            out = out + 0.5 * weight * sigma[..., p] * sigma[..., q] * hpq(z)
        for k in range(n):
            jk = j[k]
            drift_c = 1.0 - jk * s[..., k] * g - 0.5 * jk * jk * c[..., k]
            drift_s = jk * c[..., k] * g - 0.5 * jk * jk * s[..., k]
            out = out + drift_c * d1(2 * k) + drift_s * d1(2 * k + 1)
        return out

    for k in range(n):
        jk = j[k]
        ck, sk = c[..., k], s[..., k]
        out = out + 0.5 * jk * jk * (sk * sk * d2(2 * k, 2 * k)
                                     + ck * ck * d2(2 * k + 1, 2 * k + 1))
    for k in range(n):
        for m in range(n):
            if k != m:
                out = out - 0.5 * j[m] * j[k] * (
                    s[..., m] * s[..., k] * d2(2 * k, 2 * m)
                    + c[..., m] * c[..., k] * d2(2 * m + 1, 2 * k + 1))
    for m in range(n):
        for k in range(n):
            out = out - j[m] * j[k] * s[..., m] * c[..., k] * d2(2 * m, 2 * k + 1)
    rot = 0.0
    for m in range(n):
        rot = rot + j[m] * (-s[..., m] * d1(2 * m) + c[..., m] * d1(2 * m + 1))
    out = out + g * rot
    for m in range(n):
        out = out + d1(2 * m)
    return out


def sigma2_bounds(a):
    """Closed-form variance bounds ``(1, 1 + 2 sum_j a_j / j^2)``."""
    j, a = _modes_for(a)
    return 1.0, 1.0 + 2.0 * float(np.sum(a / (j * j)))


def h_norm_squared(a):
    """``||h||^2`` under the invariant law, ``sum_j a_j / j^2``."""
    j, a = _modes_for(a)
    return float(np.sum(a / (j * j)))
