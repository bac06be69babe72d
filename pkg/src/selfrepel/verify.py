"""Verification suites: run the simulations a suite needs, turn them into
:class:`TestReport` verdicts, and write report, data and figure files."""

import os

import numpy as np

from . import analysis, plotting
from .analysis import TestReport
from .errors import InsufficientSamples, NoDecayWindow, WindowTooShort
from .model import apply_generator, pi_sample, sigma2_bounds
from .montecarlo import long_run_samples, run_ensemble
from .poly import PolyTestFn
from .serialize import dump_file

SUITES = ("invariant", "generator", "sigma2", "clt", "lln")

# spawn keys for auxiliary streams; path streams use (index,) so these
# cannot collide with any path
_PI_STREAM = (2 ** 32, 2)
_LONG_RUN_STREAM = (2 ** 32, 3)


def aux_rng(seed, key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _failed(name, exc, **inputs):
    inputs["error"] = "%s: %s" % (type(exc).__name__, exc)
    return TestReport(name, None, None, None, False, inputs)


def write_csv(path, header, columns):
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(header),
               comments="")
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv` into ``(header, array)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


class Verifier:
    """Lazily runs and caches the shared stationary ensemble and its fits."""

    def __init__(self, cfg, out_dir, workers=1):
        self.cfg = cfg
        self.out_dir = out_dir
        self.workers = workers
        self.plots = bool(cfg.output.get("plots", True))
        self.files = []
        self._stats = None
        self._fit = None
        self._growth = None

    def _path(self, name):
        path = os.path.join(self.out_dir, name)
        self.files.append(name)
        return path

    # shared pieces -------------------------------------------------------

    @property
    def stats(self):
        if self._stats is None:
            self._stats = run_ensemble(self.cfg.ensemble_config(), self.workers)
            dump_file(self._stats.to_dict(), self._path("ensemble.json"))
        return self._stats

    def mixing_fit(self):
        """Fit of the drift autocovariance, or the exception explaining why
        there is none."""
        if self._fit is None:
            ac = self.stats.autocov
            try:
                self._fit = analysis.fit_mixing_rate(ac)
            except NoDecayWindow as exc:
                self._fit = exc
            fit = None if isinstance(self._fit, Exception) else self._fit
            model = (fit.prefactor * np.exp(-fit.lambda_hat * ac.lags)
                     if fit is not None else np.full(len(ac.lags), np.nan))
            write_csv(self._path("autocov.csv"), ["lag", "value", "stderr", "fit"],
                      [ac.lags, ac.values, ac.stderr, model])
            if self.plots:
                plotting.plot_autocov(ac, fit, self._path("autocov.svg"))
        return self._fit

    def growth(self):
        if self._growth is None:
            fit = self.mixing_fit()
            lam = None if isinstance(fit, Exception) else fit.lambda_hat
            try:
                self._growth = analysis.estimate_sigma2_growth(self.stats, lam)
            except WindowTooShort as exc:
                self._growth = exc
        return self._growth

    # suites --------------------------------------------------------------

    def suite_generator(self):
        an = self.cfg.analysis
        a = self.cfg.spec.coefficients
        n = self.cfg.spec.n
        variant = an["generator_variant"]
        env = pi_sample(aux_rng(self.cfg.seed, _PI_STREAM), a,
                        size=int(an["generator_samples"]))
        reports = []
        for text in an["generator_functions"]:
            f = PolyTestFn.parse(text, n)
            vals = apply_generator(f, env, a, variant)
            mean = float(vals.mean())
            se = float(vals.std(ddof=1) / np.sqrt(vals.size))
            reports.append(TestReport(
                "generator_stationarity[%s]" % text, mean, None, 3.0 * se,
                bool(abs(mean) <= 3.0 * se),
                {"variant": variant, "stderr": se, "n_samples": int(vals.size)}))
        # the as-printed operator sends c1^2 to something with pi-mean 1/a_1
        vals = apply_generator(PolyTestFn.parse("c1^2", n), env, a, "as-printed")
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / np.sqrt(vals.size))
        target = 1.0 / a[0]
        reports.append(TestReport(
            "generator_as_printed_discrepancy[c1^2]", mean, None, 3.0 * se,
            bool(abs(mean - target) <= 3.0 * se),
            {"target": target, "stderr": se, "n_samples": int(vals.size)}))
        return reports

    def suite_invariant(self):
        an = self.cfg.analysis
        spec = self.cfg.spec
        inputs = {"source": an["invariant_source"]}
        if an["invariant_source"] == "pi_sample":
            env = pi_sample(aux_rng(self.cfg.seed, _LONG_RUN_STREAM),
                            spec.coefficients, size=int(an["invariant_samples"]))
        else:
            fit = self.mixing_fit()
            if isinstance(fit, Exception):
                return [_failed("invariant_gof", fit, **inputs)]
            spacing = float(an["invariant_spacing_factor"]) / fit.lambda_hat
            seed = int(np.random.SeedSequence(
                self.cfg.seed, spawn_key=_LONG_RUN_STREAM).generate_state(1)[0])
            env = long_run_samples(
                spec, float(an["invariant_dt"]), float(an["invariant_horizon"]),
                int(an["invariant_paths"]), seed, spacing,
                burn_in=float(an["invariant_burn_in"]),
                representation="environment", scheme=an["invariant_scheme"])
            inputs.update(spacing=spacing, lambda_hat=fit.lambda_hat,
                          dt=float(an["invariant_dt"]),
                          horizon=float(an["invariant_horizon"]),
                          paths=int(an["invariant_paths"]))
        try:
            rep = analysis.invariant_gof(env, spec.coefficients, an["alpha"])
        except InsufficientSamples as exc:
            return [_failed("invariant_gof", exc, **inputs)]
        rep.inputs.update(inputs)
        cols, columns = [], {}
        for k in range(spec.n):
            for name, data in (("c%d" % (k + 1), env.c[:, k]),
                               ("s%d" % (k + 1), env.s[:, k])):
                theo, emp = plotting.qq_data(data, 1.0 / (spec.coefficients[k]
                                                          * (k + 1) ** 2))
                columns[name] = (theo, emp)
                cols += [theo, emp]
        header = [h for name in columns for h in (name + "_theory", name + "_sample")]
        write_csv(self._path("qq_invariant.csv"), header, cols)
        if self.plots:
            plotting.plot_qq(columns, self._path("qq_invariant.svg"))
        return [rep]

    def suite_sigma2(self):
        a = self.cfg.spec.coefficients
        margin = float(self.cfg.analysis["bound_margin"])
        min_r2 = float(self.cfg.analysis["min_r2"])
        reports = []
        fit = self.mixing_fit()
        if isinstance(fit, Exception):
            reports.append(_failed("mixing_rate", fit))
        else:
            reports.append(TestReport(
                "mixing_rate", fit.lambda_hat, None, min_r2,
                bool(fit.lambda_hat > 0 and fit.r2 >= min_r2), fit.to_dict()))
        growth = self.growth()
        if isinstance(growth, Exception):
            reports.append(_failed("sigma2_growth", growth))
            return reports
        reports.append(analysis.check_sigma2_bounds(growth, a, margin))
        reports.append(analysis.check_bound_conformance(growth, a))
        estimates = [growth]
        if not isinstance(fit, Exception):
            gk = analysis.estimate_sigma2_greenkubo(self.stats.autocov, fit)
            estimates.append(gk)
            cross = analysis.estimators_agree(growth, gk)
            # both readings of the Green-Kubo constant are kept on record
            cross.inputs["green_kubo_readings"] = {
                "with_factor_two": gk.value,
                "without_factor_two": gk.diagnostics["without_factor_two"]}
            reports.append(cross)
            reports.append(analysis.check_bound_conformance(gk, a))
        st = self.stats
        t = st.times
        sel = t > 0
        write_csv(self._path("growth.csv"),
                  ["t", "second_moment", "stderr", "ratio", "ratio_stderr"],
                  [t[sel], st.second_moment[sel], st.second_moment_stderr[sel],
                   st.second_moment[sel] / t[sel],
                   st.second_moment_stderr[sel] / t[sel]])
        if self.plots:
            plotting.plot_growth(st, sigma2_bounds(a), estimates,
                                 self._path("growth.svg"))
        return reports

    def suite_clt(self):
        an = self.cfg.analysis
        growth = self.growth()
        if isinstance(growth, Exception):
            return [_failed("clt_fdd", growth)]
        times = [float(t) for t in an["clt_times"]]
        rep = analysis.clt_fdd_test(self.stats, times, growth.value,
                                    eps=an["clt_eps"], alpha=an["alpha"])
        eps = rep.inputs["eps"]
        cols, columns = [], {}
        for t in times:
            y = self.stats.samples_at(t) * np.sqrt(eps / growth.value)
            theo, emp = plotting.qq_data(y, eps * t)
            columns["t=%g" % t] = (theo, emp)
            cols += [theo, emp]
        header = [h for t in times for h in ("t%g_theory" % t, "t%g_sample" % t)]
        write_csv(self._path("qq_clt.csv"), header, cols)
        if self.plots:
            plotting.plot_qq(columns, self._path("qq_clt.svg"))
        return [rep]

    def suite_lln(self):
        return [analysis.lln_check(self.stats, float(self.cfg.analysis["lln_time"]))]

    def run(self, suite):
        names = SUITES if suite == "all" else (suite,)
        reports = []
        for name in names:
            reports.extend(getattr(self, "suite_" + name)())
        return reports


def run_verify(cfg, suite, out_dir, workers=1):
    """Run ``suite`` and write ``report.json``. Returns the report dict."""
    if suite != "all" and suite not in SUITES:
        raise ValueError("unknown suite %r" % (suite,))
    os.makedirs(out_dir, exist_ok=True)
    ver = Verifier(cfg, out_dir, workers)
    reports = ver.run(suite)
    report = {
        "all_pass": all(r.passed for r in reports),
        "suite": suite,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "reports": [r.to_dict() for r in reports],
    }
    dump_file(report, os.path.join(out_dir, "report.json"))
    report["files"] = ["report.json"] + ver.files
    return report
