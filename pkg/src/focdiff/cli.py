"""Command line front end: config ingestion, experiment orchestration, artifacts.

One subcommand per mode (coeffs, series, dio, mc, tgk, report).  Runs are
driven by a JSON config file; --seed, --out-dir and --threads override the
file scalars.  Every float is serialized with 17 significant digits, so
re-running the same config byte-reproduces every artifact.

Exit codes: 0 success; 1 config parse/validation error (including malformed
DIO scripts); 2 numerical failure or inconsistent moment system; 3 reserved
for violated model-level invariants (a symbolic DV change under a DIO).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import coefficients as co
from .eidf import canonical_focusing_eidf, parse_dio_step
from .errors import AlgebraError, ConfigError, InvariantViolation, ModelError, NumericalFailure
from .mc import SimConfig, estimate_kappa_dv, estimate_kappa_tgk, run_ensemble, write_mc_csv, write_tgk_csv
from .models import ScatteringSetup
from .moments import kappa_dv_symbolic, standard_scripts, verification_report, verify_scripts

_TOP_KEYS = {"mode", "v", "dcoeff", "xi", "focusing_length", "xi_values",
             "grid_n", "mu0", "seed", "out_dir", "threads", "mc", "dio"}
_MC_KEYS = {"n_particles", "dt", "t_max", "n_snapshots", "fit_window", "vacf_cutoff"}
_DIO_KEYS = {"max_weight", "scripts"}
_MODES = ("coeffs", "series", "dio", "mc", "tgk", "report")

_REPORT_XIS = tuple(k * 0.05 for k in range(11))


def _fmt(x):
    return format(float(x), ".17g")


def emit_plotdata(series, path):
    """Write an (x, y) series as two-column whitespace-separated text.

    17 significant digits per column.  An empty series is an error and no
    file is created.
    """
    rows = [(float(x), float(y)) for x, y in series]
    if not rows:
        raise ConfigError(f"refusing to write empty plot data to {path}")
    with open(path, "w", newline="") as fh:
        for x, y in rows:
            fh.write(_fmt(x) + " " + _fmt(y) + "\n")


def _check_keys(block, allowed, what):
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown {what} keys: {sorted(extra)}")


def load_config(path):
    """Read and validate a JSON config file into a plain dict."""
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    _check_keys(cfg, _TOP_KEYS, "config")
    if "mc" in cfg:
        if not isinstance(cfg["mc"], dict):
            raise ConfigError("mc block must be an object")
        _check_keys(cfg["mc"], _MC_KEYS, "mc block")
    if "dio" in cfg:
        if not isinstance(cfg["dio"], dict):
            raise ConfigError("dio block must be an object")
        _check_keys(cfg["dio"], _DIO_KEYS, "dio block")
    if "focusing_length" in cfg and ("xi" in cfg or "xi_values" in cfg):
        raise ConfigError("give xi or focusing_length, not both")
    return cfg


def _build_setup(cfg, default_xi=0.0):
    v = float(cfg.get("v", 1.0))
    d = float(cfg.get("dcoeff", 1.0))
    if "xi" in cfg and "focusing_length" in cfg:
        raise ConfigError("give xi or focusing_length, not both")
    if "focusing_length" in cfg:
        return ScatteringSetup(v=v, dcoeff=d, focusing_length=float(cfg["focusing_length"]))
    return ScatteringSetup(v=v, dcoeff=d, xi=float(cfg.get("xi", default_xi)))


def _xi_values(cfg):
    if "xi_values" in cfg:
        vals = cfg["xi_values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("xi_values must be a nonempty list")
        return [float(x) for x in vals]
    if "xi" in cfg:
        return [float(cfg["xi"])]
    if "focusing_length" in cfg:
        return [_build_setup(cfg).xi]
    return [0.0, 0.1, 0.2, 0.3]


def _grid(cfg):
    n = cfg.get("grid_n", 256)
    if not isinstance(n, int):
        raise ConfigError(f"grid_n must be an integer, got {n!r}")
    return co.default_grid(n)


def _sim_config(cfg, setup):
    mc = cfg.get("mc", {})
    return SimConfig(
        setup=setup,
        n_particles=int(mc.get("n_particles", 200_000)),
        dt=float(mc.get("dt", 5e-3)),
        t_max=float(mc.get("t_max", 100.0)),
        n_snapshots=int(mc.get("n_snapshots", 200)),
        seed=int(cfg.get("seed", 1)),
        fit_window=float(mc.get("fit_window", 0.5)),
        vacf_cutoff=(float(mc["vacf_cutoff"]) if "vacf_cutoff" in mc else None),
    )


def _wrote(path, note=""):
    print(f"wrote {path}" + (f" ({note})" if note else ""))


def _mode_coeffs(cfg, out_dir, threads):
    grid = _grid(cfg)
    mu0 = float(cfg.get("mu0", 0.0))
    v = float(cfg.get("v", 1.0))
    d = float(cfg.get("dcoeff", 1.0))
    reports = [co.coefficient_report(ScatteringSetup(v=v, dcoeff=d, xi=xi), grid=grid, mu0=mu0)
               for xi in _xi_values(cfg)]
    path = os.path.join(out_dir, "coeffs.csv")
    co.write_coeffs_csv(reports, path)
    _wrote(path, f"{len(reports)} rows")
    return 0


def _mode_series(cfg, out_dir, threads):
    grid = _grid(cfg)
    mu0 = float(cfg.get("mu0", 0.0))
    v = float(cfg.get("v", 1.0))
    d = float(cfg.get("dcoeff", 1.0))
    xis = tuple(cfg.get("xi_values", (0.02, 0.04, 0.06, 0.08, 0.10)))

    def setup_at(xi):
        return ScatteringSetup(v=v, dcoeff=d, xi=xi)

    def at(func):
        return lambda xi: func(setup_at(xi), grid=grid, mu0=mu0)

    fits = [
        ("kappa_z", co.series_fit(lambda xi: co.kappa_z(setup_at(xi)), xis, parity="odd")),
        ("kappa_tz", co.series_fit(at(co.kappa_tz), xis, parity="odd")),
        ("kappa_ttz", co.series_fit(lambda xi: co.kappa_ntz(2, setup_at(xi), grid=grid, mu0=mu0),
                                    xis, parity="odd")),
        ("kappa_zz_bw", co.series_fit(at(co.kappa_zz_bw), xis, parity="even")),
        ("kappa_tzz", co.series_fit(at(co.kappa_tzz), xis, parity="even")),
        ("kappa_dv", co.series_fit(at(co.kappa_dv_formula), xis, parity="even")),
    ]
    lines = []
    for name, fit in fits:
        coeffs = ", ".join(f"c{p}={_fmt(c)}" for p, c in zip(fit.powers, fit.coefficients))
        lines.append(f"{name}: {coeffs} residual={_fmt(fit.residual)}")
    table = co.ntz_table(v=v, dcoeff=d, xis=xis, grid=grid, mu0=mu0)
    for n, ratio in table.ratios:
        lines.append(f"ratio_{n}tz_over_{n - 1}tz_times_D: {_fmt(ratio)}")
    path = os.path.join(out_dir, "series.txt")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    _wrote(path, f"{len(fits)} fits")
    return 0


def _parse_scripts(block, max_weight):
    if "scripts" not in block:
        return standard_scripts(max_weight)
    scripts = []
    for i, entry in enumerate(block["scripts"]):
        if isinstance(entry, dict) and "steps" in entry:
            name = entry.get("name", f"script {i}")
            steps = [parse_dio_step(s) for s in entry["steps"]]
        elif isinstance(entry, dict):
            name = f"script {i}"
            steps = [parse_dio_step(entry)]
        else:
            raise ConfigError(f"script entry {i} must be an object")
        scripts.append((name, tuple(steps)))
    return tuple(scripts)


def _mode_dio(cfg, out_dir, threads):
    block = cfg.get("dio", {})
    w = block.get("max_weight", 4)
    if not isinstance(w, int) or not (2 <= w <= 6):
        raise ConfigError(f"dio max_weight must be an integer in [2, 6], got {w!r}")
    scripts = _parse_scripts(block, w)
    results = verify_scripts(max_weight=w, scripts=scripts)
    text = verification_report(max_weight=w, results=results)
    path = os.path.join(out_dir, "dio_report.txt")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    _wrote(path, f"{len(results)} scripts")
    base_dv = kappa_dv_symbolic(canonical_focusing_eidf(w))
    print(f"baseline kappa_dv: {base_dv!r}")
    broken = [r.name for r in results if not r.dv_invariant]
    if broken:
        raise InvariantViolation("displacement-variance coefficient changed under: " + ", ".join(broken))
    print(f"kappa_dv invariant under all {len(results)} scripts")
    return 0


def _mode_mc(cfg, out_dir, threads):
    setup = _build_setup(cfg, default_xi=0.3)
    config = _sim_config(cfg, setup)
    stats = run_ensemble(config, threads=threads)
    est = estimate_kappa_dv(stats, config)
    path = os.path.join(out_dir, "mc_ensemble.csv")
    write_mc_csv(stats, path)
    _wrote(path, f"{stats.times.size} snapshots")
    formula = co.kappa_dv_formula(setup, grid=_grid(cfg))
    rel = abs(est.value - formula) / abs(formula)
    print(f"kappa_dv = {_fmt(est.value)} +/- {_fmt(est.stderr)} "
          f"(formula {_fmt(formula)}, rel diff {rel:.3%})")
    return 0


def _mode_tgk(cfg, out_dir, threads):
    setup = _build_setup(cfg, default_xi=0.3)
    config = _sim_config(cfg, setup)
    est = estimate_kappa_tgk(config, threads=threads)
    path = os.path.join(out_dir, "tgk_vacf.csv")
    write_tgk_csv(est.record, path)
    _wrote(path, f"{est.record.lags.size} lags")
    formula = co.kappa_tgk(setup, grid=_grid(cfg))
    rel = abs(est.value - formula) / abs(formula)
    print(f"kappa_tgk = {_fmt(est.value)} +/- {_fmt(est.stderr)} "
          f"(quadrature {_fmt(formula)}, rel diff {rel:.3%})")
    return 0


def _report_figures(out_dir, xis, reports, stats=None, est=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    k0 = reports[0].kappa_zz_bw if xis[0] == 0.0 else None

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xis, [r.kappa_zz_bw for r in reports], "o-", label="kappa_tgk (quadrature)")
    ax.plot(xis, [r.kappa_dv for r in reports], "s-", label="kappa_dv (formula)")
    ax.plot(xis, [r.kappa_zz_wq for r in reports], "--", label="weighted-average form")
    ax.set_xlabel("xi")
    ax.set_ylabel("parallel diffusion coefficient")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "fig_coefficients.png")
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    _wrote(path)

    if stats is not None:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(stats.times, stats.variance / 2.0, label="variance / 2")
        line = est.value * (stats.times - est.t_lo) + 0.5 * stats.variance[stats.times >= est.t_lo][0]
        ax.plot(stats.times[stats.times >= est.t_lo], line[stats.times >= est.t_lo], "--",
                label=f"fit slope {est.value:.5g}")
        ax.set_xlabel("t")
        ax.set_ylabel("displacement variance / 2")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, "fig_variance.png")
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        _wrote(path)
    return k0


def _mode_report(cfg, out_dir, threads):
    grid = _grid(cfg)
    mu0 = float(cfg.get("mu0", 0.0))
    v = float(cfg.get("v", 1.0))
    d = float(cfg.get("dcoeff", 1.0))
    xis = [float(x) for x in cfg.get("xi_values", _REPORT_XIS)]
    reports = [co.coefficient_report(ScatteringSetup(v=v, dcoeff=d, xi=xi), grid=grid, mu0=mu0)
               for xi in xis]

    path = os.path.join(out_dir, "coeffs.csv")
    co.write_coeffs_csv(reports, path)
    _wrote(path, f"{len(reports)} rows")

    path = os.path.join(out_dir, "kdv_formula.dat")
    emit_plotdata([(r.xi, r.kappa_dv) for r in reports], path)
    _wrote(path)

    path = os.path.join(out_dir, "ktgk_quadrature.dat")
    emit_plotdata([(r.xi, r.kappa_zz_bw) for r in reports], path)
    _wrote(path)

    stats = est = None
    if "mc" in cfg:
        setup = _build_setup(cfg, default_xi=0.3)
        config = _sim_config(cfg, setup)
        stats = run_ensemble(config, threads=threads)
        est = estimate_kappa_dv(stats, config)
        path = os.path.join(out_dir, "mc_ensemble.csv")
        write_mc_csv(stats, path)
        _wrote(path, f"{stats.times.size} snapshots")
        formula = co.kappa_dv_formula(setup, grid=grid, mu0=mu0)
        rel = abs(est.value - formula) / abs(formula)
        print(f"kappa_dv at xi={setup.xi:g}: mc {_fmt(est.value)} +/- {_fmt(est.stderr)} "
              f"vs formula {_fmt(formula)} (rel diff {rel:.3%})")

    _report_figures(out_dir, xis, reports, stats=stats, est=est)
    return 0


_DISPATCH = {
    "coeffs": _mode_coeffs,
    "series": _mode_series,
    "dio": _mode_dio,
    "mc": _mode_mc,
    "tgk": _mode_tgk,
    "report": _mode_report,
}


def run(config_path=None, mode=None, seed=None, out_dir=None, threads=None):
    """Execute one mode and return the process exit code."""
    try:
        cfg = load_config(config_path) if config_path is not None else {}
        if mode is None:
            mode = cfg.get("mode")
        if mode not in _MODES:
            raise ConfigError(f"mode must be one of {_MODES}, got {mode!r}")
        if seed is not None:
            cfg["seed"] = seed
        if out_dir is not None:
            cfg["out_dir"] = out_dir
        if threads is None:
            threads = cfg.get("threads", 1)
        if not isinstance(threads, int) or threads < 1:
            raise ConfigError(f"threads must be a positive integer, got {threads!r}")
        dest = cfg.get("out_dir", ".")
        os.makedirs(dest, exist_ok=True)
        return _DISPATCH[mode](cfg, dest, threads)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except (NumericalFailure, ModelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, AlgebraError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="focdiff",
        description="Parallel diffusion coefficients under adiabatic focusing: "
                    "exact symbolic checks, quadrature tables, Monte Carlo estimates.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in _MODES:
        p = sub.add_parser(mode)
        p.add_argument("config", nargs="?", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--threads", type=int, default=None)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for numerical
        # failures, so bad usage reports as a config error instead
        return 0 if exc.code == 0 else 1
    return run(args.config, mode=args.mode, seed=args.seed,
               out_dir=args.out_dir, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
