"""Static figures written next to the CSV data they are drawn from."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats as sps  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "selfrepel",
    "svg.fonttype": "none",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def plot_autocov(autocov, fit, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lags = np.asarray(autocov.lags)
        vals = np.asarray(autocov.values)
        se = np.asarray(autocov.stderr)
        ax.plot(lags, np.abs(vals), "k.", ms=3, label=r"$|\hat\rho(u)|$")
        ax.fill_between(lags, np.maximum(np.abs(vals) - 3 * se, 1e-8),
                        np.abs(vals) + 3 * se, color="0.8", label="3 s.e.")
        if fit is not None:
            u = np.linspace(0, lags[-1], 200)
            ax.plot(u, fit.prefactor * np.exp(-fit.lambda_hat * u), "r-",
                    label=r"fit $\hat\lambda=%.3f$" % fit.lambda_hat)
        ax.set_yscale("log")
        ax.set_xlabel("lag u")
        ax.set_ylabel("autocovariance of g")
        ax.legend()
        return _save(fig, path)


def plot_growth(stats, bounds, estimates, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        t = np.asarray(stats.times)
        sel = t > 0
        ratio = stats.second_moment[sel] / t[sel]
        err = 3 * stats.second_moment_stderr[sel] / t[sel]
        ax.errorbar(t[sel], ratio, yerr=err, fmt="k.", ms=3, elinewidth=0.6,
                    label=r"$E[X_t^2]/t$")
        for b, ls, name in zip(bounds, ("--", ":"), ("lower", "upper")):
            ax.axhline(b, color="b", ls=ls, lw=1, label="%s bound %g" % (name, b))
        for est, color in zip(estimates, ("r", "g")):
            ax.axhspan(est.ci_low, est.ci_high, color=color, alpha=0.2,
                       label="%s 95%% CI" % est.method)
        ax.set_xlabel("t")
        ax.set_ylabel(r"$E[X_t^2]/t$")
        ax.legend(fontsize=8)
        return _save(fig, path)


def qq_data(sample, variance):
    """Sorted sample against Gaussian quantiles at plotting positions."""
    y = np.sort(np.asarray(sample, dtype=float))
    p = (np.arange(1, len(y) + 1) - 0.5) / len(y)
    return sps.norm.ppf(p) * np.sqrt(variance), y


def plot_qq(columns, path):
    """``columns`` maps a label to ``(theoretical, empirical)`` arrays."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        lo = hi = 0.0
        for label, (theo, emp) in columns.items():
            ax.plot(theo, emp, ".", ms=2, label=label)
            lo, hi = min(lo, theo.min(), emp.min()), max(hi, theo.max(), emp.max())
        ax.plot([lo, hi], [lo, hi], "k-", lw=0.8)
        ax.set_xlabel("Gaussian quantile")
        ax.set_ylabel("normalized displacement")
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_trajectory(traj, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(traj.times, traj.x, "k-", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("X_t")
        return _save(fig, path)
