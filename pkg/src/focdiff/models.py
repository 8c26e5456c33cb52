"""Scattering geometry, pitch-angle grids, and equilibrium pitch statistics.

A ``ScatteringSetup`` holds the particle speed ``v``, the pitch-angle
scattering strength ``dcoeff`` (the ``D`` in ``D_mumu = D (1 - mu^2)``), and
the focusing geometry, expressed either as a focusing length ``L`` or as the
dimensionless focusing strength ``xi = v / (2 D L)``.  All downstream
quadrature happens on a ``PitchGrid``, a fixed Gauss-Legendre rule on
``[-1, 1]`` with cached Legendre-projection machinery so that cumulative
integrals of smooth integrands are spectrally accurate.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import ConfigError


@dataclass(frozen=True)
class ScatteringSetup:
    """Speed, scattering strength, and focusing geometry of one transport problem.

    Exactly one of ``xi`` and ``focusing_length`` must be supplied; the other
    is derived through ``xi = v / (2 * dcoeff * focusing_length)``.  A
    focusing length of ``+/-inf`` (equivalently ``xi = 0``) is the unfocused
    case.  ``dcoeff = 0`` is accepted only together with an explicit
    ``xi = 0`` so that the free-streaming limit of the stochastic stepper is
    representable; every operation that divides by the scattering strength
    checks ``dcoeff > 0`` itself.

    Instances are frozen and safe to share between threads.
    """

    v: float
    dcoeff: float
    xi: float | None = None
    focusing_length: float | None = None
    model: str = "isotropic"

    def __post_init__(self):
        v = float(self.v)
        d = float(self.dcoeff)
        if not math.isfinite(v) or v <= 0.0:
            raise ConfigError(f"particle speed must be finite and positive, got {self.v!r}")
        if math.isnan(d) or d < 0.0 or math.isinf(d):
            raise ConfigError(f"scattering strength must be finite and >= 0, got {self.dcoeff!r}")
        if self.model != "isotropic":
            raise ConfigError(f"unknown pitch-diffusion model {self.model!r}; only 'isotropic' is implemented")
        if (self.xi is None) == (self.focusing_length is None):
            raise ConfigError("exactly one of xi and focusing_length must be given")

        if self.xi is not None:
            xi = float(self.xi)
            if not math.isfinite(xi):
                raise ConfigError(f"xi must be finite, got {self.xi!r}")
            if d == 0.0 and xi != 0.0:
                raise ConfigError("dcoeff = 0 requires xi = 0 (free streaming has no focusing)")
            if xi == 0.0:
                length = math.inf
            else:
                length = v / (2.0 * d * xi)
        else:
            length = float(self.focusing_length)
            if math.isnan(length) or length == 0.0:
                raise ConfigError(f"focusing length must be nonzero (and may be +/-inf), got {self.focusing_length!r}")
            if math.isinf(length):
                xi = 0.0
            else:
                if d == 0.0:
                    raise ConfigError("cannot derive xi from a finite focusing length when dcoeff = 0")
                xi = v / (2.0 * d * length)

        object.__setattr__(self, "v", v)
        object.__setattr__(self, "dcoeff", d)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "focusing_length", length)


def pitch_diffusion(setup, mu):
    """Pitch-angle diffusion coefficient D_mumu = dcoeff * (1 - mu^2)."""
    return setup.dcoeff * (1.0 - np.square(mu))


class PitchGrid:
    """Gauss-Legendre rule on [-1, 1] with cached Legendre projection.

    The rule integrates polynomials up to degree ``2 n - 1`` exactly.  The
    cached Vandermonde matrix supports projecting grid samples onto Legendre
    coefficients and evaluating antiderivative series back on the nodes, which
    is how every cumulative (indefinite) integral in this package is formed.

    The instance is immutable after construction (arrays are marked
    read-only), so one grid can serve any number of threads.
    """

    def __init__(self, n: int = 256):
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise ConfigError(f"grid size must be an integer >= 2, got {n!r}")
        nodes, weights = npleg.leggauss(n)

        if not (np.all(np.diff(nodes) > 0.0) and nodes[0] > -1.0 and nodes[-1] < 1.0):
            raise ConfigError("grid nodes must be strictly increasing inside [-1, 1]")
        if not np.all(weights > 0.0):
            raise ConfigError("grid weights must be positive")
        total = float(weights.sum())
        if abs(total - 2.0) > 1e-12 * 2.0:
            raise ConfigError(f"grid weights must sum to 2, got {total!r}")

        # columns 0..n: one extra order so antiderivative series (degree n)
        # can be evaluated on the nodes with the same cache
        vander = npleg.legvander(nodes, n)
        projfac = (2.0 * np.arange(n) + 1.0) / 2.0

        for arr in (nodes, weights, vander, projfac):
            arr.flags.writeable = False
        self.n = n
        self.design_order = 2 * n - 1
        self.nodes = nodes
        self.weights = weights
        self._vander = vander
        self._projfac = projfac

    def integrate(self, values):
        """Definite integral over [-1, 1] of samples on the nodes."""
        return float(self.weights @ np.asarray(values))

    def project(self, values):
        """Legendre coefficients (length n) of the sampled function."""
        vals = np.asarray(values, dtype=float)
        return self._projfac * (self._vander[:, : self.n].T @ (self.weights * vals))

    def antiderivative(self, values):
        """Legendre coefficients of the antiderivative vanishing at mu = -1."""
        return npleg.legint(self.project(values), lbnd=-1)

    def series_on_nodes(self, coeffs):
        """Evaluate a Legendre series (length <= n + 1) on the grid nodes."""
        c = np.asarray(coeffs)
        if c.shape[0] > self._vander.shape[1]:
            raise ConfigError("series order exceeds grid cache")
        return self._vander[:, : c.shape[0]] @ c

    def eval_series(self, coeffs, x):
        """Evaluate a Legendre series at arbitrary points."""
        return npleg.legval(x, coeffs)

    def cumulative(self, values, mu0: float = -1.0):
        """Integral of the sampled function from mu0 to each node."""
        c = self.antiderivative(values)
        out = self.series_on_nodes(c)
        if mu0 != -1.0:
            out = out - npleg.legval(mu0, c)
        return out


@functools.lru_cache(maxsize=8)
def default_grid(n: int = 256) -> PitchGrid:
    """Shared read-only grid instance for the common sizes."""
    return PitchGrid(n)


def mu_potential(setup, mu):
    """Focusing potential M(mu) with M(-1) = 0.

    For the isotropic model this is xi * (mu + 1).  Accepts scalars or
    arrays; values outside [-1, 1] are rejected.
    """
    m = np.asarray(mu, dtype=float)
    if np.any(m < -1.0) or np.any(m > 1.0):
        raise ConfigError("pitch cosine outside [-1, 1]")
    out = setup.xi * (m + 1.0)
    if np.isscalar(mu) or getattr(mu, "ndim", 0) == 0:
        return float(out)
    return out


def mu_potential_numeric(setup, mu, dmumu=None, grid=None):
    """Focusing potential for a general pitch-diffusion profile.

    Evaluates M(mu) = (v / 2L) * integral_{-1}^{mu} (1 - s^2) / D_ss(s) ds by
    Gauss-Legendre quadrature of the integrand's antiderivative.  ``dmumu``
    is a callable of the pitch cosine; it defaults to the isotropic profile,
    for which this reduces to ``mu_potential``.  The profile must be positive
    on the open interval with an integrable ratio; no singularity handling
    beyond the quadrature itself is attempted.
    """
    m = np.asarray(mu, dtype=float)
    if np.any(m < -1.0) or np.any(m > 1.0):
        raise ConfigError("pitch cosine outside [-1, 1]")
    strength = 0.0 if math.isinf(setup.focusing_length) else setup.v / (2.0 * setup.focusing_length)
    if grid is None:
        grid = default_grid()
    if dmumu is None:
        dmumu = lambda s: pitch_diffusion(setup, s)
    ratio = (1.0 - grid.nodes**2) / dmumu(grid.nodes)
    coeffs = grid.antiderivative(ratio)
    out = strength * npleg.legval(m, coeffs)
    if np.isscalar(mu) or getattr(mu, "ndim", 0) == 0:
        return float(out)
    return out


def equilibrium_mean_mu(setup):
    """Mean pitch cosine of the equilibrium distribution ~ exp(xi * mu).

    Equals coth(xi) - 1/xi, evaluated through its Taylor series for small xi
    so the unfocused limit returns exactly 0.
    """
    xi = setup.xi
    if abs(xi) < 0.05:
        x2 = xi * xi
        return xi * (1.0 / 3.0 + x2 * (-1.0 / 45.0 + x2 * (2.0 / 945.0 - x2 / 4725.0)))
    return 1.0 / math.tanh(xi) - 1.0 / xi


def equilibrium_pitch_cdf(setup, mu):
    """CDF of the equilibrium pitch distribution on [-1, 1].

    (exp(xi mu) - exp(-xi)) / (exp(xi) - exp(-xi)), with the xi = 0 case the
    uniform CDF (mu + 1) / 2.  Vectorized over mu.
    """
    m = np.asarray(mu, dtype=float)
    if np.any(m < -1.0) or np.any(m > 1.0):
        raise ConfigError("pitch cosine outside [-1, 1]")
    xi = setup.xi
    if xi == 0.0:
        out = (m + 1.0) / 2.0
    else:
        out = (np.expm1(xi * m) - math.expm1(-xi)) / (math.expm1(xi) - math.expm1(-xi))
    if np.isscalar(mu) or getattr(mu, "ndim", 0) == 0:
        return float(out)
    return out
