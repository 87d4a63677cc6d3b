"""Near-circular convex domains, boundary frames, and the Lazutkin chart.

A domain is a radial cosine perturbation of the unit circle,
``r(theta) = 1 + sum_n a_n cos(n*theta)``, reflection-symmetric about the
horizontal axis and translated so the marked boundary point (at
``theta = pi``) sits at the origin with the domain in ``{x >= 0}``.

All boundary quantities (curvature, arclength, Lazutkin coordinate) are
evaluated through closed-form derivatives of the cosine series plus
FFT-based antiderivatives of smooth periodic integrands, so evaluations
are spectrally accurate at arbitrary points, not just grid nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import NonConvexError, NonPositiveRadiusError

TWO_PI = 2.0 * np.pi

#: boundary angle of the marked point (before centering, the point on the
#: symmetry axis that gets translated to the origin)
MARKED_THETA = np.pi

DEFAULT_FRAME_SAMPLES = 512
DEFAULT_SMOOTHNESS = 8


@dataclass(frozen=True)
class DomainProfile:
    """Radial cosine series for a strictly convex, axis-symmetric domain."""

    radial_coeffs: tuple
    smoothness_order: int
    center_offset: float

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.ones_like(theta)
        for n, a in enumerate(self.radial_coeffs):
            r = r + a * np.cos(n * theta)
        return r

    def radius_d1(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for n, a in enumerate(self.radial_coeffs):
            out = out - a * n * np.sin(n * theta)
        return out

    def radius_d2(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for n, a in enumerate(self.radial_coeffs):
            out = out - a * n * n * np.cos(n * theta)
        return out

    def position(self, theta):
        """Boundary point(s) as (..., 2) array, marked point at the origin."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack(
            [self.center_offset + r * np.cos(theta), r * np.sin(theta)], axis=-1
        )

    def velocity(self, theta):
        """d(position)/d(theta)."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        r1 = self.radius_d1(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)

    def acceleration(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        r1 = self.radius_d1(theta)
        r2 = self.radius_d2(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack(
            [(r2 - r) * c - 2.0 * r1 * s, (r2 - r) * s + 2.0 * r1 * c], axis=-1
        )

    def speed(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        r1 = self.radius_d1(theta)
        return np.sqrt(r * r + r1 * r1)

    def tangent(self, theta):
        v = self.velocity(theta)
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    def curvature(self, theta):
        """Signed curvature, positive for a counter-clockwise convex boundary."""
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        r1 = self.radius_d1(theta)
        r2 = self.radius_d2(theta)
        return (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5

    @property
    def is_circle(self):
        return all(a == 0.0 for a in self.radial_coeffs)


def build_profile(
    radial_coeffs: Sequence[float],
    smoothness_order: int = DEFAULT_SMOOTHNESS,
    check_samples: int = 4096,
) -> DomainProfile:
    """Validate a radial cosine series and return the centered profile.

    Raises ``NonPositiveRadiusError`` or ``NonConvexError`` when the sampled
    radius or curvature fails to stay positive.
    """
    coeffs = tuple(float(a) for a in radial_coeffs)
    if smoothness_order < 8:
        raise ValueError(f"smoothness_order must be >= 8, got {smoothness_order}")
    offset = 1.0 + sum(a * (-1.0) ** n for n, a in enumerate(coeffs))
    profile = DomainProfile(coeffs, int(smoothness_order), offset)

    theta = TWO_PI * np.arange(check_samples) / check_samples
    r = profile.radius(theta)
    if np.min(r) <= 0.0:
        raise NonPositiveRadiusError(
            f"radius reaches {np.min(r):.6g} <= 0 at theta={theta[np.argmin(r)]:.6g}"
        )
    kappa = profile.curvature(theta)
    if np.min(kappa) <= 0.0:
        raise NonConvexError(
            f"curvature reaches {np.min(kappa):.6g} <= 0 at theta={theta[np.argmin(kappa)]:.6g}"
        )
    return profile


def unit_circle_profile(smoothness_order: int = DEFAULT_SMOOTHNESS) -> DomainProfile:
    return build_profile((), smoothness_order)


class _FourierSeries:
    """Real trigonometric polynomial fitted to samples on a uniform period-2pi grid.

    Supports pointwise evaluation and the exact antiderivative from 0,
    which is what turns grid data into spectrally accurate arclength and
    Lazutkin coordinate maps.
    """

    def __init__(self, samples: np.ndarray, drop_tol: float = 1e-17):
        n = len(samples)
        spec = np.fft.rfft(samples) / n
        scale = max(abs(spec[0]), 1.0)
        keep = np.nonzero(np.abs(spec) > drop_tol * scale)[0]
        kmax = int(keep[-1]) if len(keep) else 0
        self.n = n
        self.coeffs = spec[: kmax + 1].copy()
        self.k = np.arange(kmax + 1)
        # rfft halves interior bins of a real signal; weight restores them
        self.weight = np.where(
            (self.k == 0) | (self.k == n // 2), 1.0, 2.0
        )
        self.mean = spec[0].real

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        phase = np.multiply.outer(t, self.k[1:])
        a = self.weight[1:] * self.coeffs[1:].real
        b = self.weight[1:] * self.coeffs[1:].imag
        return self.mean + np.cos(phase) @ a - np.sin(phase) @ b

    def antideriv(self, t):
        """Integral of the series from 0 to t."""
        t = np.asarray(t, dtype=float)
        k = self.k[1:]
        phase = np.multiply.outer(t, k)
        a = self.weight[1:] * self.coeffs[1:].real / k
        b = self.weight[1:] * self.coeffs[1:].imag / k
        periodic = np.sin(phase) @ a + (np.cos(phase) - 1.0) @ b
        return self.mean * t + periodic


class LazutkinChart:
    """Invertible boundary coordinate maps theta <-> sigma <-> x with weight mu.

    ``sigma`` is arclength from the marked point (counter-clockwise), ``x``
    the coordinate with density proportional to ``rho^(-2/3) dsigma`` (rho
    the radius of curvature), normalized to [0, 1), and the weight
    ``mu(x) = rho(x)^(-1/3) / (2 C_L)``. Creeping orbits of rotation number
    1/q then bounce at nearly uniform x spacing with angles close to
    ``mu(x)/q``; on the unit circle ``x = sigma/(2 pi)`` and ``mu = pi``.
    """

    def __init__(self, profile: DomainProfile, n_grid: int = DEFAULT_FRAME_SAMPLES):
        if n_grid < 256 or n_grid % 2:
            raise ValueError(f"n_grid must be even and >= 256, got {n_grid}")
        self.profile = profile
        self.n_grid = n_grid
        self.marked_theta = MARKED_THETA

        t = TWO_PI * np.arange(n_grid) / n_grid
        theta = MARKED_THETA + t
        speed = profile.speed(theta)
        kappa = profile.curvature(theta)
        self._speed_series = _FourierSeries(speed)
        self._density_series = _FourierSeries(kappa ** (2.0 / 3.0) * speed)

        self.perimeter = float(self._speed_series.mean * TWO_PI)
        self.lazutkin_const = float(1.0 / (self._density_series.mean * TWO_PI))

    # -- forward maps ---------------------------------------------------

    def _t(self, theta):
        return np.mod(np.asarray(theta, dtype=float) - MARKED_THETA, TWO_PI)

    def sigma_of_theta(self, theta):
        return self._speed_series.antideriv(self._t(theta))

    def x_of_theta(self, theta):
        return self.lazutkin_const * self._density_series.antideriv(self._t(theta))

    def dsigma_dtheta(self, theta):
        return self.profile.speed(theta)

    def dx_dtheta(self, theta):
        p = self.profile
        return self.lazutkin_const * p.curvature(theta) ** (2.0 / 3.0) * p.speed(theta)

    # -- inverse maps (vectorized Newton on the monotone forward maps) ---

    def _invert(self, forward: Callable, deriv: Callable, target, period: float):
        target = np.mod(np.asarray(target, dtype=float), period)
        theta = MARKED_THETA + TWO_PI * target / period
        for _ in range(50):
            resid = forward(theta) - target
            # wrap residual branch jumps from crossings of the cut at the marked point
            resid = np.where(resid > 0.5 * period, resid - period, resid)
            resid = np.where(resid < -0.5 * period, resid + period, resid)
            theta = theta - resid / deriv(theta)
            if np.max(np.abs(resid)) < 1e-14 * period:
                break
        return theta

    def theta_of_x(self, x):
        return self._invert(self.x_of_theta, self.dx_dtheta, x, 1.0)

    def theta_of_sigma(self, sigma):
        return self._invert(
            self.sigma_of_theta, self.dsigma_dtheta, sigma, self.perimeter
        )

    # -- weight ----------------------------------------------------------

    def mu_of_theta(self, theta):
        return self.profile.curvature(theta) ** (1.0 / 3.0) / (
            2.0 * self.lazutkin_const
        )

    def mu_of_x(self, x):
        return self.mu_of_theta(self.theta_of_x(x))

    @property
    def mu_at_marked(self) -> float:
        return float(self.mu_of_theta(MARKED_THETA))

    # -- quadrature over the normalized coordinate -----------------------

    @cached_property
    def x_nodes(self) -> np.ndarray:
        """Uniform grid on [0, 1), matched thetas cached for quadrature."""
        return np.arange(self.n_grid) / self.n_grid

    @cached_property
    def theta_at_x_nodes(self) -> np.ndarray:
        return self.theta_of_x(self.x_nodes)

    @cached_property
    def mu_at_x_nodes(self) -> np.ndarray:
        return self.mu_of_theta(self.theta_at_x_nodes)

    def integrate_dx(self, values_or_fn) -> float:
        """Integral over one period of x (periodic trapezoid = mean)."""
        vals = self._x_node_values(values_or_fn)
        return float(np.mean(vals))

    def fourier_exp_dx(self, values_or_fn, jmax: int) -> np.ndarray:
        """Coefficients ``integral f(x) exp(-2 pi i j x) dx`` for j = 0..jmax."""
        vals = self._x_node_values(values_or_fn)
        if jmax > self.n_grid // 4:
            raise ValueError(
                f"jmax={jmax} above anti-alias cap {self.n_grid // 4} for n_grid={self.n_grid}"
            )
        return np.fft.rfft(vals)[: jmax + 1] / self.n_grid

    def _x_node_values(self, values_or_fn) -> np.ndarray:
        if callable(values_or_fn):
            vals = np.asarray(values_or_fn(self.x_nodes), dtype=float)
        else:
            vals = np.asarray(values_or_fn, dtype=float)
        if vals.shape != (self.n_grid,):
            raise ValueError("values must match the chart grid")
        return vals

    # -- quadrature over arclength ---------------------------------------

    def integrate_dsigma(self, fn_of_theta) -> float:
        """Integral of f over the boundary against arclength."""
        t = TWO_PI * np.arange(self.n_grid) / self.n_grid
        theta = MARKED_THETA + t
        vals = np.asarray(fn_of_theta(theta), dtype=float)
        return float(np.mean(vals * self.profile.speed(theta)) * TWO_PI)


@dataclass
class BoundaryFrame:
    """Dense boundary table with its chart; immutable after construction."""

    profile: DomainProfile
    n_samples: int
    theta: np.ndarray
    position: np.ndarray
    tangent: np.ndarray
    sigma: np.ndarray
    kappa: np.ndarray
    x: np.ndarray
    mu: np.ndarray
    perimeter: float
    lazutkin_const: float
    chart: LazutkinChart

    def table(self) -> dict:
        """Columns for the frame dump."""
        return {
            "theta": self.theta,
            "sigma": self.sigma,
            "kappa": self.kappa,
            "x": self.x,
            "mu": self.mu,
        }


def build_frame(profile: DomainProfile, n_samples: int = DEFAULT_FRAME_SAMPLES) -> BoundaryFrame:
    """Tabulate boundary data on a uniform grid starting at the marked point."""
    if n_samples < 256 or n_samples % 2:
        raise ValueError(f"n_samples must be even and >= 256, got {n_samples}")
    chart = LazutkinChart(profile, n_samples)
    theta = MARKED_THETA + TWO_PI * np.arange(n_samples) / n_samples
    frame = BoundaryFrame(
        profile=profile,
        n_samples=n_samples,
        theta=theta,
        position=profile.position(theta),
        tangent=profile.tangent(theta),
        sigma=chart.sigma_of_theta(theta),
        kappa=profile.curvature(theta),
        x=chart.x_of_theta(theta),
        mu=chart.mu_of_theta(theta),
        perimeter=chart.perimeter,
        lazutkin_const=chart.lazutkin_const,
        chart=chart,
    )
    for arr in (frame.theta, frame.position, frame.tangent, frame.sigma,
                frame.kappa, frame.x, frame.mu):
        arr.setflags(write=False)
    return frame


@dataclass(frozen=True)
class ClosenessReport:
    """Sup-norm distances of the Lazutkin weight from its circle value."""

    eps: float                 # sup |mu - pi|, the value consumed by certificates
    derivative_sup: tuple      # sup |mu^(m)| for m = 1..order
    order: int

    @property
    def eps_all(self) -> float:
        """Max over the weight offset and all derivative sup-norms."""
        return max(self.eps, *self.derivative_sup) if self.derivative_sup else self.eps


def closeness_report(frame: BoundaryFrame, order: int | None = None) -> ClosenessReport:
    """Measure how far the Lazutkin weight sits from the circle's constant pi.

    Derivative sup-norms are obtained spectrally from the weight sampled on
    the uniform x grid; the scalar ``eps`` is the plain C0 distance, which is
    what the angle and contraction estimates consume (their derivation only
    uses ``|mu| <= pi + eps`` and needs ``eps < pi/2``).
    """
    chart = frame.chart
    if order is None:
        order = frame.profile.smoothness_order
    mu_vals = chart.mu_at_x_nodes
    eps_c0 = float(np.max(np.abs(mu_vals - np.pi)))

    n = chart.n_grid
    spec = np.fft.rfft(mu_vals)
    # drop the roundoff floor: high derivatives amplify mode k by (2 pi k)^m,
    # which would otherwise turn 1e-16 grid noise into the dominant term
    spec[np.abs(spec) < 1e-13 * np.abs(spec[0])] = 0.0
    freq = TWO_PI * np.arange(n // 2 + 1)  # d/dx frequencies for period-1 functions
    sups = []
    for m in range(1, order + 1):
        dm = spec * (1j * freq) ** m
        if m % 2:
            dm[-1] = 0.0  # odd derivative of the Nyquist mode is not representable
        sups.append(float(np.max(np.abs(np.fft.irfft(dm, n=n)))))
    return ClosenessReport(eps=eps_c0, derivative_sup=tuple(sups), order=order)


# -- domain spec files -------------------------------------------------------


def load_domain_spec(path) -> tuple[DomainProfile, int]:
    """Read a domain spec JSON file; returns (profile, frame_samples)."""
    with open(path) as fh:
        payload = json.load(fh)
    known = {"radial_cosine_coeffs", "smoothness_order", "frame_samples"}
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"unknown domain spec keys: {sorted(unknown)}")
    coeffs = payload.get("radial_cosine_coeffs", [])
    order = payload.get("smoothness_order", DEFAULT_SMOOTHNESS)
    n = payload.get("frame_samples", DEFAULT_FRAME_SAMPLES)
    return build_profile(coeffs, order), int(n)


def save_domain_spec(path, profile: DomainProfile, frame_samples: int) -> None:
    payload = {
        "radial_cosine_coeffs": list(profile.radial_coeffs),
        "smoothness_order": profile.smoothness_order,
        "frame_samples": int(frame_samples),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
