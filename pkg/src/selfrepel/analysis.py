"""Statistical verdicts on simulated ensembles.

Two independent routes to the effective diffusivity are provided: the slope
of ``E[X_t^2]`` against ``t`` (growth) and ``1 + 2 * integral of the drift
autocovariance`` (Green-Kubo). Agreement between them is itself a check.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import (EmptySample, InsufficientSamples, NoDecayWindow,
                     NoMixingFit, WindowTooShort)
from .model import pi_variances, sigma2_bounds

Z95 = 1.959963984540054
DEFAULT_ALPHA = 0.01


@dataclass
class TestReport:
    test: str
    statistic: float
    p_value: float
    threshold: float
    verdict: bool
    inputs: dict = field(default_factory=dict)

    # keep pytest from collecting this class
    __test__ = False

    @property
    def passed(self):
        return bool(self.verdict)

    def to_dict(self):
        return {"test": self.test, "statistic": self.statistic,
                "p_value": self.p_value, "threshold": self.threshold,
                "verdict": "pass" if self.verdict else "fail",
                "inputs": self.inputs}


@dataclass
class Sigma2Estimate:
    method: str
    value: float
    ci_low: float
    ci_high: float
    stderr: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"method": self.method, "value": self.value,
                "ci_low": self.ci_low, "ci_high": self.ci_high,
                "stderr": self.stderr, "diagnostics": self.diagnostics}


@dataclass
class MixingFit:
    lambda_hat: float
    prefactor: float
    window: tuple
    r2: float
    n_points: int
    # covariance of (log prefactor, lambda_hat)
    param_cov: np.ndarray = None

    @property
    def lambda_stderr(self):
        return float(np.sqrt(self.param_cov[1, 1])) if self.param_cov is not None else 0.0

    def to_dict(self):
        return {"lambda_hat": self.lambda_hat, "prefactor": self.prefactor,
                "window": list(self.window), "r2": self.r2,
                "n_points": self.n_points, "lambda_stderr": self.lambda_stderr}


def ks_test(sample, cdf, alpha=DEFAULT_ALPHA, name="ks"):
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise EmptySample("KS test needs at least one observation")
    res = sps.kstest(sample, cdf, method="asymp")
    return TestReport(name, float(res.statistic), float(res.pvalue), alpha,
                      bool(res.pvalue > alpha), {"n": int(sample.size)})


def invariant_gof(env, a, alpha=DEFAULT_ALPHA, min_samples=1000):
    """KS of every coordinate against its invariant Gaussian marginal.

    ``env`` holds decorrelated samples with arrays of shape ``(m, n)``.
    Bonferroni-corrected over the ``2n`` coordinates.
    """
    c = np.atleast_2d(env.c)
    s = np.atleast_2d(env.s)
    m, n = c.shape
    if m < min_samples:
        raise InsufficientSamples("%d samples, need at least %d"
                                  % (m, min_samples))
    sd = np.sqrt(pi_variances(a))
    level = alpha / (2 * n)
    per = {}
    worst_p, worst_d = 1.0, 0.0
    for k in range(n):
        for name, col in (("c%d" % (k + 1), c[:, k]), ("s%d" % (k + 1), s[:, k])):
            rep = ks_test(col, sps.norm(scale=sd[k]).cdf, level, name)
            per[name] = {"D": rep.statistic, "p_value": rep.p_value}
            worst_p = min(worst_p, rep.p_value)
            worst_d = max(worst_d, rep.statistic)
    return TestReport("invariant_gof", worst_d, worst_p, level,
                      bool(worst_p > level),
                      {"n_samples": int(m), "alpha": alpha, "coordinates": per})


def _accepted_window(autocov, k_sigma=3.0):
    v = np.asarray(autocov.values, dtype=float)
    se = np.asarray(autocov.stderr if autocov.stderr is not None
                    else np.zeros_like(v), dtype=float)
    ok = np.abs(v) > k_sigma * se
    ok &= v != 0
    if not ok[0]:
        return 0
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if bad.size else len(v)


def fit_mixing_rate(autocov, min_points=10):
    """Log-linear fit ``|rho(u)| ~ A exp(-lambda u)`` over the leading lags
    whose magnitude exceeds three standard errors."""
    end = _accepted_window(autocov)
    if end < min_points:
        raise NoDecayWindow("only %d leading lags clear 3 standard errors, "
                            "need %d" % (end, min_points))
    u = np.asarray(autocov.lags[:end], dtype=float)
    y = np.log(np.abs(np.asarray(autocov.values[:end], dtype=float)))
    A = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    dof = max(end - 2, 1)
    s2 = float(np.sum(resid ** 2)) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    # parameters are (log A, lambda) so flip the slope sign
    cov[0, 1] = cov[1, 0] = -cov[0, 1]
    lam = -float(coef[1])
    if not lam > 0:
        raise NoDecayWindow("fitted slope %.4g shows no decay" % coef[1])
    return MixingFit(lam, float(np.exp(coef[0])), (float(u[0]), float(u[-1])),
                     r2, int(end), cov)


def _trapezoid_weights(lags):
    h = np.diff(lags)
    w = np.zeros(len(lags))
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def estimate_sigma2_greenkubo(autocov, fit=None):
    """``1 + 2 * (trapezoid integral up to the truncation lag + exp tail)``.

    Without a fit this is only allowed when no lag is distinguishable from
    zero, in which case there is no tail to complete.
    """
    lags = np.asarray(autocov.lags, dtype=float)
    vals = np.asarray(autocov.values, dtype=float)
    se = np.asarray(autocov.stderr, dtype=float) if autocov.stderr is not None \
        else np.zeros_like(vals)
    if fit is None:
        if np.any(np.abs(vals) > 3 * se):
            raise NoMixingFit("tail completion needs a mixing fit")
        end = len(lags)
        tail = tail_var = 0.0
        cut = float(lags[-1])
    else:
        end = max(fit.n_points, 2)
        cut = float(lags[end - 1])
        tail = fit.prefactor * np.exp(-fit.lambda_hat * cut) / fit.lambda_hat
        grad = np.array([tail, -tail * (cut + 1.0 / fit.lambda_hat)])
        tail_var = float(grad @ fit.param_cov @ grad) if fit.param_cov is not None else 0.0
    w = _trapezoid_weights(lags[:end])
    integral = float(w @ vals[:end])
    if autocov.cov is not None:
        int_var = float(w @ np.asarray(autocov.cov)[:end, :end] @ w)
    else:
        int_var = float(np.sum((w * se[:end]) ** 2))
    total = integral + float(tail)
    value = 1.0 + 2.0 * total
    stderr = 2.0 * float(np.sqrt(max(int_var, 0.0) + max(tail_var, 0.0)))
    return Sigma2Estimate(
        "green-kubo", value, value - Z95 * stderr, value + Z95 * stderr, stderr,
        {"truncation_lag": cut, "integral": integral, "tail": float(tail),
         "without_factor_two": 1.0 + total})


def estimate_sigma2_growth(stats, lambda_hat=None, window_start=None):
    """Weighted fit of ``E[X_t^2] = sigma^2 t + b`` over late times.

    Error bars use the full across-time covariance of the squared
    displacements, since all times share the same paths.
    """
    t = np.asarray(stats.times, dtype=float)
    if lambda_hat is not None:
        if t.max() < 20.0 / lambda_hat:
            raise WindowTooShort("largest time %.4g < 20/lambda = %.4g"
                                 % (t.max(), 20.0 / lambda_hat))
        start = 10.0 / lambda_hat
    elif window_start is not None:
        start = float(window_start)
    else:
        start = 0.5 * t.max()
    sel = (t >= start) & (t > 0)
    if sel.sum() < 2:
        raise WindowTooShort("fewer than two observation times beyond t=%.4g"
                             % start)
    tt = t[sel]
    m = stats.second_moment[sel]
    se = stats.second_moment_stderr[sel]
    weights = 1.0 / se ** 2 if np.all(se > 0) else np.ones_like(tt)
    A = np.column_stack([tt, np.ones_like(tt)])
    AW = A.T * weights
    L = np.linalg.solve(AW @ A, AW)
    beta = L @ m
    cov_m = stats.sq_moments.mean_covariance[np.ix_(sel, sel)]
    cov_beta = L @ cov_m @ L.T
    stderr = float(np.sqrt(max(cov_beta[0, 0], 0.0)))
    value = float(beta[0])
    resid = m - A @ beta
    return Sigma2Estimate(
        "growth", value, value - Z95 * stderr, value + Z95 * stderr, stderr,
        {"intercept": float(beta[1]), "window": [float(tt[0]), float(tt[-1])],
         "n_times": int(sel.sum()),
         "max_abs_standardized_residual": float(np.max(np.abs(resid) / se))
         if np.all(se > 0) else float(np.max(np.abs(resid)))})


def check_sigma2_bounds(estimate, a, margin=0.2):
    """CI inside ``[lower - margin, upper + margin]`` and touching ``[lower, upper]``."""
    lo, hi = sigma2_bounds(a)
    inside = estimate.ci_low >= lo - margin and estimate.ci_high <= hi + margin
    touches = estimate.ci_high >= lo and estimate.ci_low <= hi
    excess = max(estimate.ci_high - (hi + margin), (lo - margin) - estimate.ci_low, 0.0)
    return TestReport("sigma2_bounds_%s" % estimate.method, estimate.value,
                      None, margin, bool(inside and touches),
                      {"bounds": [lo, hi], "ci": [estimate.ci_low, estimate.ci_high],
                       "ci_inside_widened_bounds": bool(inside),
                       "ci_meets_bounds": bool(touches), "excess": excess})


def check_bound_conformance(estimate, a):
    """The weaker invariant: ``ci_high >= 1`` and ``ci_low <= upper``."""
    lo, hi = sigma2_bounds(a)
    ok = estimate.ci_high >= lo and estimate.ci_low <= hi
    return TestReport("sigma2_bound_conformance_%s" % estimate.method,
                      estimate.value, None, hi, bool(ok),
                      {"bounds": [lo, hi], "ci": [estimate.ci_low, estimate.ci_high]})


def estimators_agree(first, second):
    overlap = min(first.ci_high, second.ci_high) - max(first.ci_low, second.ci_low)
    return TestReport("sigma2_cross_validation", float(first.value - second.value),
                      None, 0.0, bool(overlap >= 0),
                      {first.method: first.to_dict(), second.method: second.to_dict(),
                       "overlap": float(overlap)})


def clt_fdd_test(stats, times, sigma2, eps=None, alpha=DEFAULT_ALPHA):
    """Diffusive-scaling check of the finite-dimensional distributions.

    ``times`` are the observed (already rescaled) times ``t_i / eps``. The
    normalized vector ``X * sqrt(eps / sigma2)`` should look like Brownian
    motion at ``t_i``: each marginal Gaussian with variance ``t_i``
    (KS, Bonferroni over marginals) and pairwise covariances ``min(t_i, t_j)``
    within three standard errors.
    """
    times = [float(t) for t in times]
    if len(times) < 2:
        raise ValueError("need at least two observation times")
    if eps is None:
        eps = 1.0 / min(times)
    cols = np.column_stack([stats.samples_at(t) for t in times])
    n_paths = cols.shape[0]
    if n_paths < 1000:
        raise ValueError("need at least 1000 paths, got %d" % n_paths)
    scaled_t = [eps * t for t in times]
    y = cols * np.sqrt(eps / sigma2)
    level = alpha / len(times)
    marg, d_max, p_min, ok = [], 0.0, 1.0, True
    for i, ti in enumerate(scaled_t):
        rep = ks_test(y[:, i], sps.norm(scale=np.sqrt(ti)).cdf, level)
        marg.append({"t": ti, "D": rep.statistic, "p_value": rep.p_value,
                     "pass": rep.passed})
        d_max, p_min = max(d_max, rep.statistic), min(p_min, rep.p_value)
        ok &= rep.passed
    pairs = []
    yc = y - y.mean(axis=0)
    for i in range(len(times)):
        for k in range(i + 1, len(times)):
            prod = yc[:, i] * yc[:, k]
            cov = float(prod.sum() / (n_paths - 1))
            se = float(prod.std(ddof=1) / np.sqrt(n_paths))
            target = min(scaled_t[i], scaled_t[k])
            good = abs(cov - target) <= 3.0 * se
            pairs.append({"t": [scaled_t[i], scaled_t[k]], "cov": cov,
                          "target": target, "stderr": se, "pass": bool(good)})
            ok &= good
    return TestReport("clt_fdd", d_max, p_min, level, bool(ok),
                      {"eps": eps, "sigma2": float(sigma2), "observed_times": times,
                       "n_paths": int(n_paths), "marginals": marg,
                       "covariances": pairs})


def lln_check(stats, T=None, sigma2=None):
    """``mean |X_T / T|`` against the diffusive envelope
    ``sqrt(s2/T) * (1 + 3/sqrt(n_paths))``."""
    if T is None:
        T = float(stats.times[-1])
    x = stats.samples_at(T)
    P = len(x)
    if sigma2 is None:
        sigma2 = float(np.var(x, ddof=1) / T)
    stat = float(np.mean(np.abs(x / T)))
    scale = np.sqrt(sigma2 / T)
    envelope = float(3.0 * scale / np.sqrt(P) + scale)
    return TestReport("lln", stat, None, envelope, bool(stat <= envelope),
                      {"T": T, "sigma2": float(sigma2), "n_paths": int(P),
                       "horizon_ok": bool(T >= 100)})
