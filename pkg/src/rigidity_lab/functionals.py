"""Boundary functionals over bounce data, in the even cosine basis.

Reflection-symmetric boundary functions are stored as cosine series in the
Lazutkin coordinate, ``u(x) = sum_j u_j cos(2 pi j x)``. The functionals
come in two families: plain bounce sums weighted by sin(phi), and the
normalized sums weighted by ``mu/(q^2 sin(phi))`` whose large-q limit is
the mean of u. Fourier data of the angle-correction function S_q feeds the
operator certificates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .billiards import PeriodicOrbit
from .errors import InsufficientLadderError, SingularAngleError
from .geometry import BoundaryFrame, LazutkinChart

SIN_PHI_TOL = 1e-9


@dataclass
class CosineSeries:
    """Even function on the boundary as coefficients against cos(2 pi j x)."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=float))

    @classmethod
    def basis(cls, j: int, size: int | None = None) -> "CosineSeries":
        c = np.zeros((size if size is not None else j + 1))
        c[j] = 1.0
        return cls(c)

    @classmethod
    def zero(cls) -> "CosineSeries":
        return cls(np.zeros(1))

    @classmethod
    def from_function(cls, fn, jmax: int, n_grid: int = 1024) -> "CosineSeries":
        """Project a function of x onto the cosine basis (grid transform)."""
        if jmax > n_grid // 4:
            raise ValueError(f"jmax={jmax} above anti-alias cap {n_grid // 4}")
        x = np.arange(n_grid) / n_grid
        vals = np.asarray(fn(x), dtype=float)
        spec = np.fft.rfft(vals) / n_grid
        coeffs = 2.0 * spec[: jmax + 1].real
        coeffs[0] = spec[0].real
        return cls(coeffs)

    @property
    def jmax(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = np.arange(len(self.coeffs))
        return np.cos(2.0 * np.pi * np.multiply.outer(x, j)) @ self.coeffs

    @property
    def at_zero(self) -> float:
        return float(np.sum(self.coeffs))

    def _binop(self, other, sign):
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n)
        a[: len(self.coeffs)] = self.coeffs
        a[: len(other.coeffs)] += sign * other.coeffs
        return CosineSeries(a)

    def __add__(self, other):
        return self._binop(other, 1.0)

    def __sub__(self, other):
        return self._binop(other, -1.0)

    def __mul__(self, scalar):
        return CosineSeries(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return CosineSeries(-self.coeffs)


def series_from_arclength(fn_sigma, chart: LazutkinChart, jmax: int) -> CosineSeries:
    """Resample an arclength-parametrized boundary function into the x basis."""
    n = chart.n_grid
    sigma_vals = chart.sigma_of_theta(chart.theta_at_x_nodes)
    vals = np.asarray(fn_sigma(sigma_vals), dtype=float)
    if jmax > n // 4:
        raise ValueError(f"jmax={jmax} above anti-alias cap {n // 4}")
    spec = np.fft.rfft(vals) / n
    coeffs = 2.0 * spec[: jmax + 1].real
    coeffs[0] = spec[0].real
    return CosineSeries(coeffs)


# -- plain bounce-sum functionals ---------------------------------------------


def ell_q(u, orbit: PeriodicOrbit) -> float:
    """Sum of u at the bounce points weighted by sin(phi)."""
    return float(np.sum(u(orbit.x) * orbit.sin_phi))


def ell_0(u, frame: BoundaryFrame) -> float:
    """Boundary integral of u against (radius of curvature) d sigma."""
    chart = frame.chart

    def integrand(theta):
        return u(chart.x_of_theta(theta)) / frame.profile.curvature(theta)

    return chart.integrate_dsigma(integrand)


def ell_1(u, chart: LazutkinChart) -> float:
    """Marked-point evaluation weighted by the Lazutkin weight there."""
    return chart.mu_at_marked * float(u(0.0))


# -- normalized bounce-sum functionals ----------------------------------------


def script_L_q(u, orbit: PeriodicOrbit, chart: LazutkinChart) -> float:
    """Bounce sum of u weighted by mu/(q^2 sin phi); tends to the mean of u."""
    if np.min(orbit.sin_phi) < SIN_PHI_TOL:
        raise SingularAngleError(
            f"bounce angle too close to grazing (sin phi = {np.min(orbit.sin_phi):.3g})"
        )
    mu = chart.mu_of_theta(orbit.theta)
    return float(np.sum(u(orbit.x) * mu / orbit.sin_phi) / orbit.q**2)


def script_L_0(u, n_grid: int = 4096) -> float:
    """Mean of u over one period of x (uniform-grid quadrature)."""
    x = np.arange(n_grid) / n_grid
    return float(np.mean(u(x)))


def script_L_1(u) -> float:
    """Evaluation at the marked point x = 0."""
    return float(u(0.0))


# -- angle-correction function and its Fourier data ---------------------------


def S_q_eval(chart: LazutkinChart, q: int, x):
    """Pointwise y/sin(y) - 1 at y = mu(x)/q; nonnegative while y < pi."""
    y = chart.mu_of_x(x) / q
    return y / np.sin(y) - 1.0


def _s_q_node_values(chart: LazutkinChart, q: int) -> np.ndarray:
    y = chart.mu_at_x_nodes / q
    return y / np.sin(y) - 1.0


def sigma_p(chart: LazutkinChart, q: int, p: int) -> complex:
    """Fourier coefficient of the angle-correction function at frequency p."""
    spec = chart.fourier_exp_dx(_s_q_node_values(chart, q), abs(int(p)))
    return complex(spec[abs(int(p))])


def sigma_p_table(chart: LazutkinChart, q: int, pmax: int) -> np.ndarray:
    """Coefficients for p = 0..pmax in one transform."""
    return chart.fourier_exp_dx(_s_q_node_values(chart, q), pmax)


def tilde_sigma(chart: LazutkinChart, j: int) -> complex:
    """Fourier coefficient of mu^2/6, the q-independent limit of q^2 sigma_j(q)."""
    vals = chart.mu_at_x_nodes**2 / 6.0
    spec = chart.fourier_exp_dx(vals, abs(int(j)))
    return complex(spec[abs(int(j))])


def tilde_sigma_table(chart: LazutkinChart, jmax: int) -> np.ndarray:
    vals = chart.mu_at_x_nodes**2 / 6.0
    return chart.fourier_exp_dx(vals, jmax)


# -- limit diagnostics ---------------------------------------------------------


@dataclass
class RiemannLimitReport:
    qs: tuple
    values: dict          # q -> script_L_q(u)
    limit: float          # script_L_0(u)
    diffs: dict           # q -> |value - limit|
    decay_exponent: float # fitted slope of log|diff| vs log q, sign flipped


def riemann_limit_check(u, orbits: Mapping[int, PeriodicOrbit], chart: LazutkinChart) -> RiemannLimitReport:
    """Tabulate |L_q(u) - mean(u)| over a q ladder and fit its decay rate."""
    qs = tuple(sorted(orbits))
    if len(qs) < 3:
        raise InsufficientLadderError(f"need at least 3 ladder periods, got {len(qs)}")
    limit = script_L_0(u)
    values = {q: script_L_q(u, orbits[q], chart) for q in qs}
    diffs = {q: abs(values[q] - limit) for q in qs}
    logq = np.log(np.array(qs, dtype=float))
    logd = np.log(np.maximum([diffs[q] for q in qs], 1e-300))
    slope = float(np.polyfit(logq, logd, 1)[0])
    return RiemannLimitReport(qs=qs, values=values, limit=limit, diffs=diffs,
                              decay_exponent=-slope)


# -- invariant data vector -----------------------------------------------------


@dataclass
class InvariantVector:
    """Spectral data: bounce sums of K/sin(phi) per period plus heat coefficients.

    Index q of ``d`` holds the period-q wave-trace entry in the unit
    normalization; entry 1 is the marked-point value K(0) and entry 0 the
    large-q limit, the mean of K/mu.
    """

    d: np.ndarray
    H0: float
    H1: float
    q_max: int
    normalization: str = "C_gamma=1"
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "d": [float(v) for v in self.d],
            "H0": float(self.H0),
            "H1": float(self.H1),
            "normalization": self.normalization,
            "q_max": int(self.q_max),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "InvariantVector":
        return cls(
            d=np.asarray(payload["d"], dtype=float),
            H0=float(payload["H0"]),
            H1=float(payload["H1"]),
            q_max=int(payload["q_max"]),
            normalization=payload.get("normalization", "C_gamma=1"),
            provenance=payload.get("provenance", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "InvariantVector":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def robin_data(
    frame: BoundaryFrame,
    chart: LazutkinChart,
    K: CosineSeries,
    orbits: Mapping[int, PeriodicOrbit],
    heat: tuple,
) -> InvariantVector:
    """Forward-synthesize the invariant vector of a Robin function from orbits."""
    qs = sorted(orbits)
    q_max = max(qs)
    d = np.zeros(q_max + 1)
    d[0] = chart.integrate_dx(K(chart.x_nodes) / chart.mu_at_x_nodes)
    d[1] = K.at_zero
    for q in qs:
        orb = orbits[q]
        if np.min(orb.sin_phi) < SIN_PHI_TOL:
            raise SingularAngleError(f"grazing bounce at q={q}")
        d[q] = float(np.sum(K(orb.x) / orb.sin_phi))
    return InvariantVector(
        d=d,
        H0=float(heat[0]),
        H1=float(heat[1]),
        q_max=q_max,
        provenance={"orbit_periods": qs},
    )
