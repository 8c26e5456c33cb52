"""Parallel diffusion coefficients of the focused transport equation.

Everything here reduces to nested pitch-angle integrals against the
equilibrium weight exp(M(mu)).  Two devices keep plain Gauss-Legendre
quadrature at spectral accuracy even though the natural integrands carry
1/(1 - mu^2) endpoint singularities:

* Outer integrals of the form J*I0(G) - I1(G), where G is a cumulative
  integral with weight 1/(1 - nu^2), are integrated by parts against
  V(mu) = integral_mu^1 (J - s) e^M(s) ds.  V vanishes at both endpoints
  (J is the discrete equilibrium mean), so the boundary terms drop and the
  quadrature only ever sees V(mu)/(1 - mu^2) * h(mu) with h smooth.

* Inner cumulative integrals of h(nu)/(1 - nu^2) subtract the linear
  interpolant of h between the endpoints.  The subtracted part integrates
  exactly to logarithms, carried symbolically as coefficients of
  ln(1 +/- mu); the remainder is smooth and handled by Legendre projection.
  Weighted averages of the logarithmic parts use closed-form integrals of
  ln(1 +/- mu) against Legendre polynomials, and cumulative integrals of
  e^M ln(1 +/- nu) are rewritten by parts so only bounded integrands remain.

The reference point mu0 of the inner cumulative integrals is arbitrary
(default 0); results are invariant under moving it and the property is
tested, not assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, NumericalFailure
from .models import PitchGrid, default_grid, equilibrium_mean_mu

_XI_MAX = 200.0


def _lnmoments(n):
    """Exact integrals of ln(1+x) P_k(x) and ln(1-x) P_k(x) over [-1, 1].

    For k >= 1 these are 2 (-1)^(k+1) / (k (k+1)) and -2 / (k (k+1)); at
    k = 0 both equal 2 ln 2 - 2.
    """
    k = np.arange(1, n)
    lp = np.empty(n)
    lm = np.empty(n)
    lp[0] = 2.0 * math.log(2.0) - 2.0
    lm[0] = lp[0]
    lp[1:] = 2.0 * (-1.0) ** (k + 1) / (k * (k + 1))
    lm[1:] = -2.0 / (k * (k + 1))
    return lp, lm


def _check_mu0(mu0):
    mu0 = float(mu0)
    if not (-1.0 < mu0 < 1.0):
        raise ConfigError(f"reference point mu0 must lie strictly inside (-1, 1), got {mu0!r}")
    return mu0


def _require_scattering(setup):
    if setup.dcoeff <= 0.0:
        raise ConfigError("diffusion coefficients require dcoeff > 0")
    if abs(setup.xi) > _XI_MAX:
        raise ConfigError(f"|xi| > {_XI_MAX:g} exceeds the double-precision range of the pipeline")


class _Workspace:
    """Per-(setup, grid, mu0) evaluation state shared by the kappa integrals."""

    def __init__(self, setup, grid, mu0):
        _require_scattering(setup)
        self.setup = setup
        self.g = grid
        self.mu0 = _check_mu0(mu0)
        self.xi = setup.xi
        self.v = setup.v
        self.d = setup.dcoeff
        x = grid.nodes
        self.x = x
        self.M = self.xi * (1.0 + x)
        self.eM = np.exp(self.M)
        self.emM = np.exp(-self.M)
        self.I0_1 = grid.integrate(self.eM)
        self.I1_1 = grid.integrate(x * self.eM)
        self.J = self.I1_1 / self.I0_1
        self.lnp, self.lnm = _lnmoments(grid.n)

    @cached_property
    def eM_proj(self):
        return self.g.project(self.eM)

    @cached_property
    def xeM_proj(self):
        return self.g.project(self.x * self.eM)

    @cached_property
    def V(self):
        # V(mu) = int_mu^1 (J - s) e^M ds; zero at both ends because J is the
        # discrete equilibrium mean on this grid
        c = self.g.antiderivative((self.J - self.x) * self.eM)
        return self.g.eval_series(c, 1.0) - self.g.series_on_nodes(c)

    @cached_property
    def Vred(self):
        return self.V / (1.0 - self.x * self.x)

    @cached_property
    def E(self):
        """Cumulative integral of e^M from -1."""
        return self.g.cumulative(self.eM)

    @cached_property
    def Erho(self):
        return self.g.cumulative(self.x * self.eM)

    @cached_property
    def D2(self):
        return 2.0 * self.E / self.I0_1 - 1.0

    @cached_property
    def D1(self):
        return 2.0 * self.Erho / self.I0_1 + (1.0 - self.x * self.x) / 2.0

    # -- weighted integrals of smooth + ap ln(1+x) + am ln(1-x) against e^M, x e^M

    def wint0(self, smooth, ap=0.0, am=0.0):
        val = self.g.integrate(self.eM * smooth)
        if ap or am:
            val += ap * float(self.eM_proj @ self.lnp) + am * float(self.eM_proj @ self.lnm)
        return val

    def wint1(self, smooth, ap=0.0, am=0.0):
        val = self.g.integrate(self.x * self.eM * smooth)
        if ap or am:
            val += ap * float(self.xeM_proj @ self.lnp) + am * float(self.xeM_proj @ self.lnm)
        return val

    def cum_sing(self, h, hm1, hp1):
        """Cumulative integral from mu0 of h(nu) / (1 - nu^2).

        hm1 and hp1 are the endpoint values of h.  Returns
        (values, ap, am, smooth) with values = ap ln(1+x) + am ln(1-x) + smooth;
        the linear interpolant of h through the endpoints integrates exactly to
        the log terms, the remainder has removable endpoint behavior.
        """
        x = self.x
        lin = hm1 * (1.0 - x) / 2.0 + hp1 * (1.0 + x) / 2.0
        rem = (h - lin) / (1.0 - x * x)
        c = self.g.antiderivative(rem)
        smooth = self.g.series_on_nodes(c) - self.g.eval_series(c, self.mu0)
        ap = hm1 / 2.0
        am = -hp1 / 2.0
        smooth = smooth - (ap * math.log1p(self.mu0) + am * math.log1p(-self.mu0))
        vals = ap * np.log1p(x) + am * np.log1p(-x) + smooth
        return vals, ap, am, smooth

    def cum_eM_logs(self, smooth, ap, am):
        """Cumulative integral from -1 of e^M (smooth + ap ln(1+nu) + am ln(1-nu)).

        The log parts go by parts: int e^M ln(1+nu) = E ln(1+x) - int E/(1+nu)
        and int e^M ln(1-nu) = (E - E(1)) ln(1-x) + E(1) ln 2 + int (E-E(1))/(1-nu),
        all integrands bounded.
        """
        g = self.g
        x = self.x
        out = g.cumulative(self.eM * smooth)
        if ap:
            out = out + ap * (self.E * np.log1p(x) - g.cumulative(self.E / (1.0 + x)))
        if am:
            F = self.E - self.I0_1
            out = out + am * (F * np.log1p(-x) + self.I0_1 * math.log(2.0) + g.cumulative(F / (1.0 - x)))
        return out

    def cum_xeM_logs(self, smooth, ap, am):
        """Same as cum_eM_logs but against the weight x e^M."""
        g = self.g
        x = self.x
        out = g.cumulative(x * self.eM * smooth)
        if ap:
            out = out + ap * (self.Erho * np.log1p(x) - g.cumulative(self.Erho / (1.0 + x)))
        if am:
            F = self.Erho - self.I1_1
            out = out + am * (F * np.log1p(-x) + self.I1_1 * math.log(2.0) + g.cumulative(F / (1.0 - x)))
        return out

    def outer(self, h):
        """(v/2) [J I0(G) - I1(G)] for G' = h / (1 - mu^2), via the V weight."""
        return 0.5 * self.v * self.g.integrate(self.Vred * h)

    # ---- coefficients ----

    def kappa_zz_bw(self):
        return -0.25 * self.v * self.v * self.g.integrate(self.V * self.emM) / self.d

    @cached_property
    def beta1(self):
        """(kappa_tz, smooth part of the recursion seed, ap, am)."""
        h1 = self.emM * self.D2 / self.d
        h1_m1 = -1.0 / self.d
        h1_p1 = math.exp(-2.0 * self.xi) / self.d
        ktz = self.outer(h1)
        _w1, ap, am, w1s = self.cum_sing(h1, h1_m1, h1_p1)
        cbar = self.wint0(w1s, ap, am) / self.I0_1
        return ktz, w1s - cbar, ap, am

    def kappa_tz(self):
        return self.beta1[0]

    def ntz_chain(self, nmax):
        """{1: kappa_tz, 2: kappa_ttz, ..., nmax: ...} via the integral recursion."""
        ktz, beta_s, ap, am = self.beta1
        out = {1: ktz}
        for n in range(2, nmax + 1):
            H = self.cum_eM_logs(beta_s, ap, am)
            hn = self.emM * H / self.d
            out[n] = self.outer(hn)
            if n == nmax:
                break
            # hn vanishes at both endpoints, so no new log terms appear
            _gn, ap, am, gs = self.cum_sing(hn, 0.0, 0.0)
            cbar = self.wint0(gs, ap, am) / self.I0_1
            beta_s = gs - cbar
        return out

    def kappa_tzz(self):
        g = self.g
        x = self.x
        hb = self.emM * (self.D1 - self.J) / self.d
        hb_m1 = -self.J / self.d
        hb_p1 = math.exp(-2.0 * self.xi) * self.J / self.d
        br, bap, bam, brs = self.cum_sing(hb, hb_m1, hb_p1)
        brbar = self.wint0(brs, bap, bam) / self.I0_1
        if self.xi == 0.0:
            # limit of (v/(2 D xi)) (1 - 2 e^M / I0) as xi -> 0
            lterm = -self.v * x / (2.0 * self.d)
        else:
            lterm = (self.v / (2.0 * self.d * self.xi)) * (1.0 - 2.0 * self.eM / self.I0_1)
        _ktz, b1s, a1p, a1m = self.beta1
        HB = g.cumulative(lterm) + self.v * self.cum_eM_logs(brs - brbar, bap, bam)
        HrhoB2 = self.cum_xeM_logs(b1s, a1p, a1m)
        cB2 = self.wint1(b1s, a1p, a1m)
        psi = HB + self.v * HrhoB2 - 0.5 * self.v * cB2
        hA = self.emM * psi / self.d
        return self.outer(hA)


def kappa_parallel0(setup):
    """Unfocused parallel diffusion coefficient v^2 / (6 D)."""
    if setup.dcoeff <= 0.0:
        raise ConfigError("kappa_parallel0 requires dcoeff > 0")
    return setup.v**2 / (6.0 * setup.dcoeff)


def kappa_z(setup):
    """Coherent streaming coefficient v * <mu>_eq = v (coth xi - 1/xi)."""
    return setup.v * equilibrium_mean_mu(setup)


def kappa_zz_bw(setup, grid=None, mu0=0.0):
    """Backward-weighted second-order coefficient (even in xi; 1/6 v^2/D at xi=0)."""
    ws = _Workspace(setup, grid or default_grid(), mu0)
    return ws.kappa_zz_bw()


def kappa_tgk(setup, grid=None, mu0=0.0):
    """Velocity-autocorrelation (time-integral) diffusion coefficient.

    Evaluated from its closed double-integral form, which coincides exactly
    with the backward-weighted coefficient; the function exists so callers
    can ask for the autocorrelation value by name.
    """
    return kappa_zz_bw(setup, grid, mu0)


def kappa_tz(setup, grid=None, mu0=0.0):
    """Mixed first-order coefficient (odd in xi, slope 2 v xi / (9 D) at 0).

    The inner regularized integral is referenced to mu0, but the outer
    combination annihilates additive constants exactly, so the result cannot
    depend on the reference point; the invariance is property-tested.
    """
    ws = _Workspace(setup, grid or default_grid(), mu0)
    return ws.kappa_tz()


def kappa_ntz(n, setup, grid=None, mu0=0.0, check=True):
    """Higher time-derivative coefficients, n >= 2, via the integral recursion.

    With check=True the value is recomputed on a doubled grid and the two
    must agree, otherwise the grid resolution is deemed insufficient.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ConfigError(f"kappa_ntz is defined for integer n >= 2, got {n!r}")
    g = grid or default_grid()
    val = _Workspace(setup, g, mu0).ntz_chain(n)[n]
    if check:
        val2 = _Workspace(setup, default_grid(2 * g.n), mu0).ntz_chain(n)[n]
        scale = max(abs(val), 1e-3 * kappa_parallel0(setup))
        if abs(val - val2) > 1e-4 * scale:
            raise NumericalFailure(
                f"kappa_{n}tz changed by {abs(val - val2):.3e} under grid doubling; increase the grid"
            )
    return val


def kappa_tzz(setup, grid=None, mu0=0.0):
    """Mixed second-order coefficient (even in xi, -v^2/(36 D) + O(xi^2)).

    Validated for |xi| <= 0.5; outside that range the value is returned but
    carries no accuracy claim beyond grid-doubling agreement.
    """
    ws = _Workspace(setup, grid or default_grid(), mu0)
    return ws.kappa_tzz()


def kappa_zz_wq(setup, grid=None, mu0=0.0):
    """Second-order coefficient including the quoted xi^2 kappa_parallel0 / 5 correction."""
    return kappa_zz_bw(setup, grid, mu0) + setup.xi**2 * kappa_parallel0(setup) / 5.0


def kappa_dv_formula(setup, grid=None, mu0=0.0):
    """Displacement-variance diffusion coefficient kappa_zz_wq - kappa_z * kappa_tz."""
    ws = _Workspace(setup, grid or default_grid(), mu0)
    eta = setup.xi**2 * kappa_parallel0(setup) / 5.0
    return ws.kappa_zz_bw() + eta - kappa_z(setup) * ws.kappa_tz()


@dataclass(frozen=True)
class SeriesFit:
    """Two-term parity-restricted polynomial fit in xi."""

    powers: tuple
    coefficients: tuple
    residual: float
    cond: float

    @property
    def leading(self):
        return self.coefficients[0]


def series_fit(func, xis, parity):
    """Fit func(xi) ~ c0 xi^p0 + c1 xi^p1 with (p0, p1) = (1, 3) or (0, 2).

    func is assumed to have the stated parity; at least four distinct finite
    xi values are required.  Returns the coefficients together with the rms
    residual and the condition number of the design matrix; an
    ill-conditioned design raises NumericalFailure.
    """
    xs = np.asarray(list(xis), dtype=float)
    if xs.size < 4:
        raise ConfigError(f"series_fit needs at least 4 xi values, got {xs.size}")
    if not np.all(np.isfinite(xs)) or np.unique(xs).size != xs.size:
        raise ConfigError("series_fit xi values must be finite and distinct")
    if parity == "odd":
        powers = (1, 3)
    elif parity == "even":
        powers = (0, 2)
    else:
        raise ConfigError(f"parity must be 'odd' or 'even', got {parity!r}")
    if parity == "odd" and np.any(xs == 0.0):
        raise ConfigError("odd fits require nonzero xi values")

    A = np.column_stack([xs ** p for p in powers])
    cond = float(np.linalg.cond(A))
    if not math.isfinite(cond) or cond > 1e8:
        raise NumericalFailure(f"series_fit design matrix is ill-conditioned (cond = {cond:.3e})")
    y = np.array([float(func(x)) for x in xs])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return SeriesFit(powers=powers, coefficients=(float(coef[0]), float(coef[1])),
                     residual=resid, cond=cond)


@dataclass(frozen=True)
class NtzTable:
    """Small-xi slopes of kappa_ntz and their consecutive ratios.

    entries: ((n, slope), ...) for n = 2..nmax, slope = d kappa_ntz / d xi at 0.
    ratios: ((n, dcoeff * slope_n / slope_{n-1}), ...) for n = 3..nmax; the
    sequence must approach -1/2 monotonically, i.e. |ratio + 1/2| strictly
    decreasing, otherwise the table is rejected as numerically untrustworthy.
    """

    entries: tuple
    ratios: tuple

    def __post_init__(self):
        devs = [abs(r + 0.5) for _n, r in self.ratios]
        for a, b in zip(devs, devs[1:]):
            if not (b < a):
                raise NumericalFailure(
                    "kappa_ntz ratio sequence does not close in on -1/2; grid or fit range inadequate"
                )


def ntz_table(v=1.0, dcoeff=1.0, nmax=7, xis=None, grid=None, mu0=0.0, grid_check=True):
    """Tabulate small-xi slopes of kappa_ntz for n = 2..nmax and their ratios.

    Slopes come from odd two-term fits over a small positive xi grid
    (default 0.02..0.10).  With grid_check=True the whole table is recomputed
    on a doubled grid and any slope moving by more than 0.1% relative raises
    NumericalFailure.
    """
    from .models import ScatteringSetup

    if not isinstance(nmax, int) or nmax < 2:
        raise ConfigError(f"nmax must be an integer >= 2, got {nmax!r}")
    if xis is None:
        xis = (0.02, 0.04, 0.06, 0.08, 0.10)
    xs = np.asarray(list(xis), dtype=float)
    if xs.size < 4:
        raise ConfigError("ntz_table needs at least 4 xi values for the slope fits")
    g = grid or default_grid()

    def slopes_on(grid_):
        chains = []
        for x in xs:
            setup = ScatteringSetup(v=v, dcoeff=dcoeff, xi=float(x))
            chains.append(_Workspace(setup, grid_, mu0).ntz_chain(nmax))
        out = {}
        for n in range(2, nmax + 1):
            vals = {float(x): c[n] for x, c in zip(xs, chains)}
            fit = series_fit(lambda x: vals[float(x)], xs, "odd")
            out[n] = fit.leading
        return out

    slopes = slopes_on(g)
    if grid_check:
        slopes2 = slopes_on(default_grid(2 * g.n))
        scale0 = 1e-3 * kappa_parallel0(ScatteringSetup(v=v, dcoeff=dcoeff, xi=0.0))
        for n in range(2, nmax + 1):
            if abs(slopes[n] - slopes2[n]) > 1e-3 * max(abs(slopes[n]), scale0):
                raise NumericalFailure(
                    f"kappa_{n}tz slope not grid-converged: {slopes[n]!r} vs {slopes2[n]!r}"
                )

    entries = tuple((n, slopes[n]) for n in range(2, nmax + 1))
    ratios = tuple((n, dcoeff * slopes[n] / slopes[n - 1]) for n in range(3, nmax + 1))
    return NtzTable(entries=entries, ratios=ratios)


_REPORT_FIELDS = ("kappa_z", "kappa_zz_bw", "kappa_zz_wq", "kappa_tz", "kappa_tzz",
                  "kappa_parallel0", "kappa_dv")


@dataclass(frozen=True)
class CoefficientReport:
    """All scalar coefficients of one setup plus grid-doubling error estimates."""

    xi: float
    kappa_z: float
    kappa_zz_bw: float
    kappa_zz_wq: float
    kappa_tz: float
    kappa_tzz: float
    kappa_parallel0: float
    kappa_dv: float
    errors: dict

    def __post_init__(self):
        if not self.kappa_parallel0 > 0.0:
            raise NumericalFailure("kappa_parallel0 must be positive")
        for name, err in self.errors.items():
            if not (err >= 0.0):
                raise NumericalFailure(f"error estimate for {name} is not >= 0: {err!r}")

    @property
    def err_max(self):
        return max(self.errors.values())


def coefficient_report(setup, grid=None, mu0=0.0):
    """Evaluate every coefficient on the working grid and a doubled grid.

    The quoted values come from the working grid; each error field is the
    absolute difference against the doubled grid.  Raises NumericalFailure if
    any coefficient fails to converge under doubling, or if the
    backward-weighted coefficient exceeds kappa_parallel0 beyond its error
    bar for |xi| <= 1.
    """
    g = grid or default_grid()
    k0 = kappa_parallel0(setup)
    kz = kappa_z(setup)
    eta = setup.xi**2 * k0 / 5.0

    def evaluate(grid_):
        ws = _Workspace(setup, grid_, mu0)
        bw = ws.kappa_zz_bw()
        tz = ws.kappa_tz()
        tzz = ws.kappa_tzz()
        wq = bw + eta
        dv = wq - kz * tz
        return {"kappa_z": kz, "kappa_zz_bw": bw, "kappa_zz_wq": wq, "kappa_tz": tz,
                "kappa_tzz": tzz, "kappa_parallel0": k0, "kappa_dv": dv}

    vals = evaluate(g)
    vals2 = evaluate(default_grid(2 * g.n))
    errors = {name: abs(vals[name] - vals2[name]) for name in _REPORT_FIELDS}

    for name in _REPORT_FIELDS:
        tol = max(1e-6 * k0, 1e-4 * abs(vals[name]))
        if errors[name] > tol:
            raise NumericalFailure(
                f"{name} did not converge under grid doubling "
                f"(changed by {errors[name]:.3e} at n = {g.n}); increase the grid"
            )
    if abs(setup.xi) <= 1.0 and vals["kappa_zz_bw"] > k0 + errors["kappa_zz_bw"] + 1e-12 * k0:
        raise NumericalFailure("kappa_zz_bw exceeds kappa_parallel0 for |xi| <= 1")

    return CoefficientReport(xi=setup.xi, errors=errors, **vals)


_CSV_HEADER = "xi,kappa_z,kappa_zz_bw,kappa_zz_wq,kappa_tz,kappa_tzz,kappa_dv,err_max"


def write_coeffs_csv(reports, path):
    """Write coefficient reports as CSV with a fixed column set.

    Floats are rendered with 17 significant digits so files are
    byte-reproducible across runs on the same platform.
    """
    lines = [_CSV_HEADER]
    for r in reports:
        row = (r.xi, r.kappa_z, r.kappa_zz_bw, r.kappa_zz_wq, r.kappa_tz,
               r.kappa_tzz, r.kappa_dv, r.err_max)
        lines.append(",".join(format(x, ".17g") for x in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
