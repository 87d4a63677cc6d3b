"""Periodic billiard orbits on convex axis-symmetric tables.

The central solver finds, for each period q >= 2, the reflection-symmetric
orbit of rotation number 1/q through the marked point that maximizes the
polygon length. It runs damped Newton on the length gradient in reduced
coordinates (only the bounces in the open upper half are free; mirror
bounces are slaved, and for even q the antipodal axis bounce is pinned).

A geometric shooting map (`billiard_map`) provides an independent route to
the same orbits and to finite-difference return-map Jacobians; it shares no
code with the variational solver beyond the boundary parametrization.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateChordError,
    InsufficientLadderError,
    NoConvergenceError,
    NotMaximalError,
    SingularTransferError,
)
from .geometry import MARKED_THETA, TWO_PI, BoundaryFrame, LazutkinChart

GRADIENT_TOL = 1e-13
MAX_NEWTON_ITER = 60
HESSIAN_POS_TOL = 1e-8


@dataclass
class PeriodicOrbit:
    """Reflection-symmetric maximal q-periodic orbit through the marked point."""

    q: int
    theta: np.ndarray        # bounce parameters, lifted to [pi, 3*pi)
    sigma: np.ndarray
    x: np.ndarray            # Lazutkin coordinates, increasing from 0
    phi: np.ndarray          # bounce angles against the tangent, in (0, pi/2]
    sin_phi: np.ndarray
    chords: np.ndarray       # chord lengths, chord k joins bounces k and k+1
    length: float
    maximal: bool
    hessian_max_eig: float
    reflection_residual: float
    gradient_residual: float
    iterations: int

    @property
    def rotation_number(self) -> float:
        return 1.0 / self.q


@dataclass
class PoincareData:
    """Linearized q-bounce return map in (arclength, angle) variables."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    trace: float
    det: float
    nondegenerate: bool
    unit_eigen_tol: float


def orbit_length(frame: BoundaryFrame, thetas) -> float:
    """Total length of the closed polygon with vertices at boundary parameters."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size < 2:
        raise ValueError("need at least two bounce parameters")
    pts = frame.profile.position(thetas)
    chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    if np.min(chords) < 1e-12:
        raise DegenerateChordError(
            f"consecutive bounce points coincide (chord {np.min(chords):.3g})"
        )
    return float(np.sum(chords))


def _length_grad_hess(profile, thetas):
    """Gradient and Hessian of the closed polygon length in the vertex parameters."""
    q = len(thetas)
    pts = profile.position(thetas)
    vel = profile.velocity(thetas)
    acc = profile.acceleration(thetas)

    nxt = np.roll(np.arange(q), -1)
    d = pts[nxt] - pts
    ell = np.linalg.norm(d, axis=1)
    if np.min(ell) < 1e-12:
        raise DegenerateChordError("degenerate chord during orbit solve")
    u = d / ell[:, None]

    # gradient: tangential mismatch of incoming vs outgoing unit chords
    u_in = np.roll(u, 1, axis=0)
    grad = np.einsum("ki,ki->k", vel, u_in - u)

    hess = np.zeros((q, q))
    vu_tail = np.einsum("ki,ki->k", vel, u)            # V_k . u_k
    vu_head = np.einsum("ki,ki->k", vel[nxt], u)       # V_{k+1} . u_k
    vv_tail = np.einsum("ki,ki->k", vel, vel)
    vv_head = np.einsum("ki,ki->k", vel[nxt], vel[nxt])
    vv_cross = np.einsum("ki,ki->k", vel, vel[nxt])
    au_tail = np.einsum("ki,ki->k", acc, u)
    au_head = np.einsum("ki,ki->k", acc[nxt], u)

    diag_tail = (vv_tail - vu_tail**2) / ell - au_tail
    diag_head = (vv_head - vu_head**2) / ell + au_head
    off = -(vv_cross - vu_tail * vu_head) / ell

    idx = np.arange(q)
    np.add.at(hess, (idx, idx), diag_tail)
    np.add.at(hess, (nxt, nxt), diag_head)
    np.add.at(hess, (idx, nxt), off)
    np.add.at(hess, (nxt, idx), off)
    return float(np.sum(ell)), grad, hess


def _symmetric_layout(q: int):
    """Reduction map from free upper-half bounce offsets to the full orbit.

    Returns (assemble, reduction_matrix) where assemble(s) yields the full
    offset vector t (t_0 = 0 marked, t_{q-k} = 2*pi - t_k mirrored, and for
    even q the antipodal bounce pinned at pi).
    """
    half = (q - 1) // 2
    reduction = np.zeros((q, half))
    for j in range(1, half + 1):
        reduction[j, j - 1] = 1.0
        reduction[q - j, j - 1] = -1.0

    def assemble(s):
        t = np.zeros(q)
        t[1 : half + 1] = s
        t[q - half :] = (TWO_PI - s)[::-1]
        if q % 2 == 0:
            t[q // 2] = np.pi
        return t

    return assemble, reduction


def maximal_marked_orbit(
    frame: BoundaryFrame,
    q: int,
    tol: float = GRADIENT_TOL,
    max_iter: int = MAX_NEWTON_ITER,
    require_maximal: bool = True,
) -> PeriodicOrbit:
    """Solve for the symmetric maximal q-periodic orbit through the marked point."""
    if q < 2:
        raise ValueError(f"period must be >= 2, got {q}")
    profile = frame.profile
    assemble, reduction = _symmetric_layout(q)
    half = reduction.shape[1]

    s = TWO_PI * np.arange(1, half + 1) / q  # regular polygon start
    iterations = 0
    if half:
        t = assemble(s)
        _, grad, hess = _length_grad_hess(profile, MARKED_THETA + t)
        gr = reduction.T @ grad
        for iterations in range(1, max_iter + 1):
            if np.max(np.abs(gr)) < tol:
                break
            hr = reduction.T @ hess @ reduction
            try:
                step = np.linalg.solve(hr, -gr)
            except np.linalg.LinAlgError:
                step = gr * (0.1 / max(np.max(np.abs(gr)), 1.0))
            lam, accepted = 1.0, False
            for _ in range(50):
                cand = s + lam * step
                t_cand = assemble(cand)
                if np.all(np.diff(t_cand) > 1e-12) and t_cand[-1] < TWO_PI - 1e-12:
                    _, grad_c, hess_c = _length_grad_hess(profile, MARKED_THETA + t_cand)
                    gr_c = reduction.T @ grad_c
                    if np.max(np.abs(gr_c)) < np.max(np.abs(gr)) or lam < 1e-8:
                        s, grad, hess, gr = cand, grad_c, hess_c, gr_c
                        accepted = True
                        break
                lam *= 0.5
            if not accepted:
                raise NoConvergenceError(f"orbit solve stalled at q={q}")
        else:
            raise NoConvergenceError(
                f"orbit solve hit the iteration cap at q={q}, "
                f"|grad|={np.max(np.abs(gr)):.3g}"
            )

    t = assemble(s)
    theta = MARKED_THETA + t
    length, grad, hess = _length_grad_hess(profile, theta)
    gr = reduction.T @ grad
    hr = reduction.T @ hess @ reduction
    max_eig = float(np.max(np.linalg.eigvalsh(hr))) if half else -np.inf
    maximal = max_eig < HESSIAN_POS_TOL
    if require_maximal and not maximal:
        raise NotMaximalError(
            f"second variation indefinite at q={q} (max eigenvalue {max_eig:.3g})"
        )

    pts = profile.position(theta)
    tangents = profile.tangent(theta)
    d = np.roll(pts, -1, axis=0) - pts
    chords = np.linalg.norm(d, axis=1)
    u = d / chords[:, None]
    u_in = np.roll(u, 1, axis=0)

    cross_out = tangents[:, 0] * u[:, 1] - tangents[:, 1] * u[:, 0]
    dot_out = np.einsum("ki,ki->k", tangents, u)
    cross_in = u_in[:, 0] * tangents[:, 1] - u_in[:, 1] * tangents[:, 0]
    dot_in = np.einsum("ki,ki->k", u_in, tangents)
    phi_out = np.arctan2(cross_out, dot_out)
    phi_in = np.arctan2(cross_in, dot_in)

    chart = frame.chart
    orbit = PeriodicOrbit(
        q=q,
        theta=theta,
        sigma=chart.sigma_of_theta(theta),
        x=chart.x_of_theta(theta),
        phi=0.5 * (phi_in + phi_out),
        sin_phi=0.5 * (cross_in + cross_out),
        chords=chords,
        length=length,
        maximal=maximal,
        hessian_max_eig=max_eig,
        reflection_residual=float(np.max(np.abs(phi_in - phi_out))),
        gradient_residual=float(np.max(np.abs(gr))) if half else 0.0,
        iterations=iterations,
    )
    orbit.x[0] = 0.0  # marked point, exact by convention
    return orbit


def compute_orbits(
    frame: BoundaryFrame, qs, threads: int = 1, **kwargs
) -> dict:
    """Solve orbits for each period in qs; periods are independent solves."""
    qs = sorted(set(int(q) for q in qs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda q: maximal_marked_orbit(frame, q, **kwargs), qs))
        return dict(zip(qs, results))
    return {q: maximal_marked_orbit(frame, q, **kwargs) for q in qs}


# -- linearized return map ----------------------------------------------------


def linearized_poincare(
    frame: BoundaryFrame,
    orbit: PeriodicOrbit,
    sin_phi_tol: float = 1e-9,
    unit_eigen_tol: float = 1e-8,
) -> PoincareData:
    """Product of per-bounce transfer matrices in (arclength, angle) variables."""
    kappa = frame.profile.curvature(orbit.theta)
    sin_phi = orbit.sin_phi
    if np.min(sin_phi) < sin_phi_tol:
        raise SingularTransferError(
            f"bounce angle too close to grazing (sin phi = {np.min(sin_phi):.3g})"
        )
    q = orbit.q
    mat = np.eye(2)
    for k in range(q):
        k1 = (k + 1) % q
        tau = orbit.chords[k]
        k0c, k1c = kappa[k], kappa[k1]
        s0, s1 = sin_phi[k], sin_phi[k1]
        step = np.array(
            [
                [k0c * tau - s0, tau],
                [k0c * k1c * tau - k0c * s1 - k1c * s0, k1c * tau - s1],
            ]
        ) / s1
        mat = step @ mat
    eig = np.linalg.eigvals(mat)
    trace = float(np.trace(mat))
    # unit eigenvalue of an area-preserving map <=> det(M - I) = 2 - trace = 0;
    # the trace is stable where the eigenvalues of a near-parabolic map are not
    return PoincareData(
        matrix=mat,
        eigenvalues=eig,
        trace=trace,
        det=float(np.linalg.det(mat)),
        nondegenerate=bool(abs(trace - 2.0) > unit_eigen_tol),
        unit_eigen_tol=unit_eigen_tol,
    )


# -- geometric shooting map (independent of the variational solver) -----------


def billiard_map(frame: BoundaryFrame, theta: float, direction, scan: int = 1024):
    """One bounce of the billiard map: next boundary parameter and reflected direction.

    The next intersection is bracketed by scanning the signed cross product of
    the ray direction against the boundary, then polished with a root solve;
    convexity guarantees a single crossing away from the start point.
    """
    profile = frame.profile
    p0 = profile.position(theta)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)

    def side(dtheta):
        p = profile.position(theta + dtheta)
        return d[0] * (p[..., 1] - p0[1]) - d[1] * (p[..., 0] - p0[0])

    grid = TWO_PI * np.arange(1, scan) / scan
    vals = side(grid)
    signs = np.sign(vals)
    flips = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    hit = None
    for i in flips:
        mid = 0.5 * (grid[i] + grid[i + 1])
        p = profile.position(theta + mid)
        if np.dot(p - p0, d) > 0:
            hit = (grid[i], grid[i + 1])
            break
    if hit is None:
        raise NoConvergenceError("shooting failed to bracket the next bounce")
    dtheta = brentq(side, hit[0], hit[1], xtol=1e-14, rtol=8.9e-16)
    theta1 = theta + dtheta
    t1 = profile.tangent(theta1)
    if t1.ndim > 1:
        t1 = t1[0]
    d_out = 2.0 * np.dot(d, t1) * t1 - d
    return float(theta1), d_out


def shoot_orbit(frame: BoundaryFrame, q: int, phi0: float, theta0: float = MARKED_THETA):
    """Iterate the shooting map q times from (theta0, launch angle phi0)."""
    t0 = frame.profile.tangent(theta0)
    normal = np.array([-t0[1], t0[0]])  # interior side for counter-clockwise boundary
    d = np.cos(phi0) * t0 + np.sin(phi0) * normal
    thetas = [float(theta0)]
    for _ in range(q):
        theta0, d = billiard_map(frame, theta0, d)
        thetas.append(theta0)
    return np.array(thetas), d


# -- diagnostics ---------------------------------------------------------------


@dataclass
class GenericityReport:
    """Distinct-length and nondegeneracy diagnostics over computed orbits."""

    qs: tuple
    lengths: dict
    min_length_gap: float
    closest_pair: tuple
    traces: dict
    nondegenerate: dict
    warning: str = (
        "only marked symmetric maximal orbits are enumerated; the distinct-length "
        "check does not cover other periodic orbits"
    )


def genericity_report(
    frame: BoundaryFrame, orbits: Mapping[int, PeriodicOrbit], unit_eigen_tol: float = 1e-8
) -> GenericityReport:
    qs = tuple(sorted(orbits))
    lengths = {q: orbits[q].length for q in qs}
    gap, pair = np.inf, ()
    for i, qa in enumerate(qs):
        for qb in qs[i + 1 :]:
            g = abs(lengths[qa] - lengths[qb])
            if g < gap:
                gap, pair = g, (qa, qb)
    traces, flags = {}, {}
    for q in qs:
        pd = linearized_poincare(frame, orbits[q], unit_eigen_tol=unit_eigen_tol)
        traces[q] = pd.trace
        flags[q] = pd.nondegenerate
    return GenericityReport(
        qs=qs,
        lengths=lengths,
        min_length_gap=float(gap),
        closest_pair=pair,
        traces=traces,
        nondegenerate=flags,
    )


@dataclass
class AlphaBetaFit:
    """Creeping-orbit corrections: bounce drift (odd) and angle correction (even).

    alpha_hat[q][k] = q^2 (x_q^k - k/q) and beta_hat[q][k] = q^2 (q phi_q^k /
    mu(x_q^k) - 1) on each orbit's own grid; `alpha`/`beta` are the Richardson
    limits from the two finest ladder rungs, tabulated on the second-finest
    grid, with sine/cosine coefficients against sin(2 pi j x), cos(2 pi j x).
    """

    qs: tuple
    grid: np.ndarray
    alpha_hat: dict
    beta_hat: dict
    alpha: np.ndarray
    beta: np.ndarray
    alpha_sine: np.ndarray
    beta_cos: np.ndarray
    alpha_parity_residual: float
    beta_parity_residual: float
    alpha_residuals: dict
    beta_residuals: dict
    alpha_slope: float
    beta_slope: float

    @property
    def beta0(self) -> float:
        return float(self.beta_cos[0])


def fit_alpha_beta(chart: LazutkinChart, orbits: Mapping[int, PeriodicOrbit]) -> AlphaBetaFit:
    """Fit the 1/q^2 corrections of bounce positions and angles over a q ladder."""
    qs = tuple(sorted(orbits))
    if len(qs) < 3:
        raise InsufficientLadderError(f"need at least 3 ladder periods, got {len(qs)}")
    for qa, qb in zip(qs, qs[1:]):
        if qb % qa:
            raise ValueError("ladder periods must divide each other (use a dyadic ladder)")

    alpha_hat, beta_hat = {}, {}
    for q in qs:
        orb = orbits[q]
        k_over_q = np.arange(q) / q
        mu = chart.mu_of_theta(orb.theta)
        alpha_hat[q] = q * q * (orb.x - k_over_q)
        beta_hat[q] = q * q * (q * orb.phi / mu - 1.0)

    q_fit, q_top = qs[-2], qs[-1]
    stride = q_top // q_fit
    wa, wb = q_top**2, q_fit**2
    alpha = (wa * alpha_hat[q_top][::stride] - wb * alpha_hat[q_fit]) / (wa - wb)
    beta = (wa * beta_hat[q_top][::stride] - wb * beta_hat[q_fit]) / (wa - wb)
    grid = np.arange(q_fit) / q_fit

    mirror = (q_fit - np.arange(q_fit)) % q_fit
    alpha_parity = float(np.max(np.abs(alpha + alpha[mirror])))
    beta_parity = float(np.max(np.abs(beta - beta[mirror])))

    spec_a = np.fft.rfft(alpha) / q_fit
    spec_b = np.fft.rfft(beta) / q_fit
    alpha_sine = -2.0 * spec_a.imag
    alpha_sine[0] = 0.0
    beta_cos = 2.0 * spec_b.real
    beta_cos[0] = spec_b[0].real

    alpha_res, beta_res = {}, {}
    for q in qs:
        sub = q // np.gcd(q, q_fit)            # orbit indices landing on the fit grid
        take = np.arange(0, q, sub) if sub > 1 else np.arange(q)
        pts = (take / q * q_fit).round().astype(int) % q_fit
        alpha_res[q] = float(np.max(np.abs(alpha_hat[q][take] - alpha[pts])) / q**2)
        beta_res[q] = float(np.max(np.abs(beta_hat[q][take] - beta[pts])) / q**2)

    logq = np.log(np.array(qs, dtype=float))
    slope_a = float(np.polyfit(logq, np.log([max(alpha_res[q], 1e-300) for q in qs]), 1)[0])
    slope_b = float(np.polyfit(logq, np.log([max(beta_res[q], 1e-300) for q in qs]), 1)[0])

    return AlphaBetaFit(
        qs=qs,
        grid=grid,
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        alpha=alpha,
        beta=beta,
        alpha_sine=alpha_sine,
        beta_cos=beta_cos,
        alpha_parity_residual=alpha_parity,
        beta_parity_residual=beta_parity,
        alpha_residuals=alpha_res,
        beta_residuals=beta_res,
        alpha_slope=slope_a,
        beta_slope=slope_b,
    )
