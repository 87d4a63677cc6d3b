"""Inverse pipelines: Robin function recovery and uniqueness audits.

`recover_robin` inverts the forward data model. Writing the unknown as
v = K/mu, the period-q data row reads L_q(v) = d_q / q^2, the marked row
pins v(0) (the marked value of K must be supplied, matching the uniqueness
hypothesis), and the limit entry gives the mean of v. The mean-zero part
is solved through the certified divisor-plus-remainder block: the rank-one
second-order term is eliminated by a scalar fixed point (two Neumann
solves), then K = mu * v.

`triple_disambiguate` replays the three-function argument as a numerical
audit, and `two_symmetry_pin` replays the doubly-symmetric marked-value
pinning through the axis 2-orbit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .billiards import PeriodicOrbit, compute_orbits, fit_alpha_beta
from .errors import (
    NotContractiveError,
    ResidualTooLargeError,
    SymmetryViolationError,
)
from .functionals import CosineSeries, InvariantVector, robin_data
from .geometry import BoundaryFrame, LazutkinChart, build_frame, build_profile, closeness_report
from .operator import (
    ContractionCertificate,
    GammaSpaceParams,
    assemble_T,
    assemble_T_star_R,
    build_b_star,
    contraction_certificate,
    lstsq_invert,
    neumann_invert,
    square_block,
)
from .traces import heat_defect


@dataclass(frozen=True)
class RecoveryOptions:
    gamma: float = 3.5
    jmax: int | None = None          # square-system size; default min(q_max - 4, 16), >= 8
    norm_jmax: int = 48              # column truncation for the certificate norm
    neumann_order: int = 40
    neumann_tol: float = 0.0         # 0 disables early stopping (fixed order)
    residual_tol: float = 1e-6       # held-out data rows beyond this raise
    override_certificate: bool = False
    c_constant: float = 17.0
    ladder: tuple = (8, 16, 32, 64)
    output_jmax: int | None = None   # projection order of K_hat (default 2n)
    use_extrapolated_d0: bool = False
    strict_residual: bool = True


@dataclass
class RecoveryResult:
    K_hat: CosineSeries
    v: CosineSeries                   # recovered K/mu
    second_order_value: float         # the eliminated rank-one scalar
    certificate: ContractionCertificate
    neumann_iterations: int
    neumann_update_norms: np.ndarray
    lstsq_max_diff: float
    solve_residual: float             # on the square block rows
    holdout_residual: float | None    # on data rows beyond the block
    marked_residual: float            # |mu(0) v(0) - K0|
    data_marked_gap: float            # |K0 supplied - marked entry of the data|
    heat_residual: tuple              # |heat(K_hat) - (H0, H1) of the data|
    d0_extrapolation_gap: float | None = None


def estimate_limit_entry(data: InvariantVector, qs: Sequence[int]) -> float:
    """Extrapolate the limit entry from the two largest data rows: d_q/q^2 -> d_0."""
    qs = sorted(q for q in qs if q >= 2)
    if len(qs) < 2:
        raise ValueError("need at least two periods to extrapolate the limit entry")
    qa, qb = qs[-2], qs[-1]
    va, vb = data.d[qa] / qa**2, data.d[qb] / qb**2
    return float((qb**2 * vb - qa**2 * va) / (qb**2 - qa**2))


def recover_robin(
    data: InvariantVector,
    frame: BoundaryFrame,
    chart: LazutkinChart,
    orbits: Mapping[int, PeriodicOrbit],
    K0_at_marked: float,
    options: RecoveryOptions | None = None,
) -> RecoveryResult:
    """Recover the Robin function from its invariant vector and marked value."""
    opt = options or RecoveryOptions()
    q_max = data.q_max
    n = opt.jmax if opt.jmax is not None else max(8, min(q_max - 4, 16))
    if n > q_max:
        raise ValueError(f"square block size {n} exceeds data depth q_max={q_max}")
    need = [q for q in range(2, n + 1) if q not in orbits]
    if need:
        orbits = dict(orbits) | compute_orbits(frame, need)

    params = GammaSpaceParams(gamma=opt.gamma, J=max(opt.norm_jmax, n), Q=n)
    ladder_orbits = dict(orbits)
    for q in opt.ladder:
        if q not in ladder_orbits:
            ladder_orbits[q] = compute_orbits(frame, [q])[q]
    fit = fit_alpha_beta(chart, {q: ladder_orbits[q] for q in opt.ladder})
    cert = contraction_certificate(
        frame, chart, params,
        orbits=orbits, fit=fit, c_constant=opt.c_constant, ladder=opt.ladder,
    )
    if not (cert.inversion_certified or opt.override_certificate):
        raise NotContractiveError(
            f"numeric contraction norm {cert.numeric_norm_completed:.4f} >= 1 "
            "and no override requested"
        )

    tsr = assemble_T_star_R(frame, chart, orbits, params, fit)
    A = square_block(tsr, n)
    lss = tsr.extras["lss"][1 : n + 1]

    # full-depth rows (up to q_max) feed the limit-entry column and holdout checks
    T_full = assemble_T(frame, chart, orbits, GammaSpaceParams(opt.gamma, n, q_max))
    v0_data = float(data.d[0])
    d0_gap = None
    if opt.use_extrapolated_d0:
        est = estimate_limit_entry(data, [q for q in range(2, q_max + 1)])
        d0_gap = abs(est - v0_data)
        v0 = est
    else:
        v0 = v0_data

    mu0 = chart.mu_at_marked
    g = np.zeros(n)
    g[0] = K0_at_marked / mu0 - v0
    col0 = {int(q): T_full.row(int(q))[0] for q in T_full.row_q if q >= 2}
    for q in range(2, n + 1):
        g[q - 1] = data.d[q] / q**2 - v0 * col0[q]

    b = build_b_star(np.arange(1, n + 1))
    certified = cert.inversion_certified or opt.override_certificate
    w_g, info_g = neumann_invert(A, g, order=opt.neumann_order,
                                 tol=opt.neumann_tol, certified=certified,
                                 gamma=opt.gamma)
    w_b, _ = neumann_invert(A, b, order=opt.neumann_order,
                            tol=opt.neumann_tol, certified=certified,
                            gamma=opt.gamma)
    lam = float(lss @ w_g.coeffs[1:]) / (1.0 + float(lss @ w_b.coeffs[1:]))
    w = w_g.coeffs[1:] - lam * w_b.coeffs[1:]

    ls_g = lstsq_invert(A, g).coeffs[1:]
    ls_b = lstsq_invert(A, b).coeffs[1:]
    lam_ls = float(lss @ ls_g) / (1.0 + float(lss @ ls_b))
    w_ls = ls_g - lam_ls * ls_b
    lstsq_diff = float(np.max(np.abs(w - w_ls)))

    v = CosineSeries(np.concatenate([[v0], w]))
    out_j = opt.output_jmax if opt.output_jmax is not None else min(2 * n, chart.n_grid // 4)
    mu_vals = chart.mu_at_x_nodes
    k_vals = mu_vals * v(chart.x_nodes)
    spec = np.fft.rfft(k_vals) / chart.n_grid
    coeffs = 2.0 * spec[: out_j + 1].real
    coeffs[0] = spec[0].real
    K_hat = CosineSeries(coeffs)

    solve_residual = float(np.max(np.abs(A.entries @ w - (g - lam * b))))
    marked_residual = abs(mu0 * (v0 + float(np.sum(w))) - K0_at_marked)

    # the period rows alone cannot see the marked value (which is exactly why
    # it must be supplied); consistency with the data's own marked entry and
    # with the quadratic heat coefficient is what flags a wrong pin
    data_marked_gap = abs(K0_at_marked - float(data.d[1]))
    h0_hat, h1_hat = heat_defect(frame, K_hat)
    heat_residual = (abs(h0_hat - data.H0), abs(h1_hat - data.H1))

    holdout = None
    hold_rows = [q for q in range(n + 1, q_max + 1) if q in orbits]
    if hold_rows:
        vals = []
        for q in hold_rows:
            row = T_full.row(q)
            vals.append(abs(row[0] * v0 + row[1 : n + 1] @ w - data.d[q] / q**2))
        holdout = float(np.max(vals))
    if opt.strict_residual:
        bad_holdout = holdout is not None and holdout > opt.residual_tol
        if bad_holdout or data_marked_gap > opt.residual_tol:
            raise ResidualTooLargeError(
                f"data inconsistent at this truncation: marked-entry gap "
                f"{data_marked_gap:.3e}, held-out row residual "
                f"{holdout if holdout is not None else float('nan'):.3e} "
                f"(tolerance {opt.residual_tol:.1e})"
            )

    return RecoveryResult(
        K_hat=K_hat,
        v=v,
        second_order_value=lam,
        certificate=cert,
        neumann_iterations=info_g.iterations,
        neumann_update_norms=info_g.update_norms,
        lstsq_max_diff=lstsq_diff,
        solve_residual=solve_residual,
        holdout_residual=holdout,
        marked_residual=marked_residual,
        data_marked_gap=data_marked_gap,
        heat_residual=heat_residual,
        d0_extrapolation_gap=d0_gap,
    )


# -- three-function disambiguation audit ---------------------------------------


@dataclass
class TripleVerdict:
    verdict: str                      # "pair_identical" | "data_inconsistent" | "inconclusive"
    pair: tuple | None
    marked_values: tuple
    f_square_integral: float | None
    spectral_residuals: tuple | None  # sup |L_q((Ki-Kj-c f)/mu)| for the two combinations
    heat_differences: tuple | None    # the two mixed heat integrals, zero under equal data
    identity_residual: float | None   # |int (K2-K3) f - (K2(0)-K3(0)) int f^2|
    notes: str = ""


def triple_disambiguate(
    K1: CosineSeries,
    K2: CosineSeries,
    K3: CosineSeries,
    frame: BoundaryFrame,
    chart: LazutkinChart,
    orbits: Mapping[int, PeriodicOrbit],
    marked_tol: float = 1e-10,
) -> TripleVerdict:
    """Replay the three-function argument on concrete boundary functions.

    With two equal marked values the conclusion routes through the pinned
    uniqueness result; with three distinct marked values the audit forms f,
    checks the proportionality relations, applies the heat-difference
    identities, and reduces to a positive square integral, i.e. the data
    could not all have been equal.
    """
    ks = (K1, K2, K3)
    marked = tuple(float(k.at_zero) for k in ks)
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(marked[i] - marked[j]) <= marked_tol:
                return TripleVerdict(
                    verdict="pair_identical",
                    pair=(i + 1, j + 1),
                    marked_values=marked,
                    f_square_integral=None,
                    spectral_residuals=None,
                    heat_differences=None,
                    identity_residual=None,
                    notes=(
                        f"marked values {i + 1} and {j + 1} agree; equal data plus "
                        "the pinned-value uniqueness route forces those two "
                        "functions to coincide"
                    ),
                )

    f = (K2 - K3) * (1.0 / (marked[1] - marked[2]))
    K12 = (K1 - K2) - (marked[0] - marked[1]) * f
    K13 = (K1 - K3) - (marked[0] - marked[2]) * f

    def spectral_sup(K: CosineSeries) -> float:
        best = 0.0
        for q in sorted(orbits):
            orb = orbits[q]
            best = max(best, abs(float(np.sum(K(orb.x) / orb.sin_phi)) / q**2))
        return best

    r12, r13 = spectral_sup(K12), spectral_sup(K13)

    speed = frame.profile.speed(frame.theta)

    def dsigma(vals):
        return float(np.mean(vals * speed) * 2.0 * np.pi)

    k1v, k2v, k3v = (k(frame.x) for k in ks)
    fv = f(frame.x)
    heat12 = dsigma((k1v - k2v) * (frame.kappa + 2.0 * (k1v + k2v)))
    heat13 = dsigma((k1v - k3v) * (frame.kappa + 2.0 * (k1v + k3v)))
    cross = dsigma((k2v - k3v) * fv)
    f_sq = dsigma(fv * fv)
    identity_residual = abs(cross - (marked[1] - marked[2]) * f_sq)

    if f_sq > marked_tol:
        verdict, notes = "data_inconsistent", (
            "equal-data hypothesis forces the square integral of f to vanish, "
            f"but it equals {f_sq:.6g} > 0 while f(0) = 1"
        )
    else:
        verdict, notes = "inconclusive", "square integral of f below tolerance"
    return TripleVerdict(
        verdict=verdict,
        pair=None,
        marked_values=marked,
        f_square_integral=f_sq,
        spectral_residuals=(r12, r13),
        heat_differences=(heat12, heat13),
        identity_residual=identity_residual,
        notes=notes,
    )


# -- doubly symmetric pinning ---------------------------------------------------


@dataclass
class TwoSymmetryReport:
    constraint_gap: float        # difference of the axis 2-orbit data rows
    marked_difference: float     # K1(0) - K2(0), computed directly
    axis_values: tuple           # (K1(0), K1(1/2), K2(0), K2(1/2))
    sin_phi: float
    detected: bool               # constraint gap resolves a marked offset
    verdict: str


def two_symmetry_pin(
    frame: BoundaryFrame,
    K1: CosineSeries,
    K2: CosineSeries,
    symmetry_tol: float = 1e-12,
    detection_tol: float = 1e-10,
) -> TwoSymmetryReport:
    """Pin the marked values through the 2-orbit joining the two axis points.

    Requires the domain and both functions to carry the second reflection
    symmetry (even radial harmonics, even cosine frequencies); then both
    functions take equal values at the two axis points, and the 2-orbit data
    row differing by 2(K1(0) - K2(0))/sin(phi) detects any marked offset.
    """
    odd_dom = [a for idx, a in enumerate(frame.profile.radial_coeffs) if idx % 2 and abs(a) > symmetry_tol]
    if odd_dom:
        raise SymmetryViolationError(
            "domain has odd radial harmonics; no second perpendicular symmetry axis"
        )
    for name, K in (("K1", K1), ("K2", K2)):
        odd = [c for j, c in enumerate(K.coeffs) if j % 2 and abs(c) > symmetry_tol]
        if odd:
            raise SymmetryViolationError(f"{name} has odd cosine frequencies; not doubly symmetric")

    orbit2 = compute_orbits(frame, [2])[2]
    x_far = orbit2.x[1]
    sin_phi = float(np.min(orbit2.sin_phi))
    d1 = float(np.sum(K1(orbit2.x) / orbit2.sin_phi))
    d2 = float(np.sum(K2(orbit2.x) / orbit2.sin_phi))
    gap = d1 - d2
    vals = (float(K1(0.0)), float(K1(x_far)), float(K2(0.0)), float(K2(x_far)))
    marked_diff = vals[0] - vals[2]
    detected = abs(gap) > detection_tol
    verdict = (
        "marked offset detected by the axis 2-orbit"
        if detected
        else "marked values pinned equal; with equal data and a passing "
             "certificate the two functions coincide"
    )
    return TwoSymmetryReport(
        constraint_gap=gap,
        marked_difference=marked_diff,
        axis_values=vals,
        sin_phi=sin_phi,
        detected=detected,
        verdict=verdict,
    )


# -- batch round-trip harness ----------------------------------------------------


@dataclass(frozen=True)
class SuiteOptions:
    frame_samples: int = 512
    q_max: int = 16
    n_random_K: int = 20
    k_jmax: int = 6
    seed: int = 2024
    recovery: RecoveryOptions = field(default_factory=RecoveryOptions)


@dataclass
class SuiteSummary:
    rows: list
    options: dict

    @property
    def max_error(self) -> float:
        errs = [r["recovery_error_sup"] for r in self.rows if r["recovery_error_sup"] is not None]
        return max(errs) if errs else 0.0

    def to_json_dict(self) -> dict:
        return {"options": self.options, "rows": self.rows, "max_error": self.max_error}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def to_csv_text(self) -> str:
        cols = [
            "domain", "K_label", "K0", "recovery_error_sup", "coeff_error_sup",
            "lstsq_max_diff", "holdout_residual", "certificate_numeric",
            "certificate_analytic", "certified", "passed",
        ]
        lines = [",".join(cols)]
        for r in self.rows:
            lines.append(",".join(repr(r[c]) if not isinstance(r[c], str) else r[c] for c in cols))
        return "\n".join(lines) + "\n"


def draw_random_K(rng: np.random.Generator, k_jmax: int) -> CosineSeries:
    """Random function in span(e_1..e_k) with vanishing marked value."""
    c = np.zeros(k_jmax + 1)
    c[1:] = rng.standard_normal(k_jmax)
    c[1:] -= np.mean(c[1:])  # coefficient sum zero <=> value 0 at the marked point
    return CosineSeries(c)


def rigidity_suite(
    domain_coeffs: Sequence[Sequence[float]],
    K_list: Sequence[CosineSeries] | None = None,
    options: SuiteOptions | None = None,
) -> SuiteSummary:
    """Forward-synthesize data and invert it across a (domain x K) grid."""
    opt = options or SuiteOptions()
    rows = []
    for coeffs in domain_coeffs:
        profile = build_profile(list(coeffs))
        frame = build_frame(profile, opt.frame_samples)
        chart = frame.chart
        qs = sorted(set(range(2, opt.q_max + 1)) | set(opt.recovery.ladder))
        orbits = compute_orbits(frame, qs)
        eps = closeness_report(frame).eps
        if K_list is None:
            rng = np.random.default_rng(opt.seed)
            ks = [(f"random_{i}", draw_random_K(rng, opt.k_jmax)) for i in range(opt.n_random_K)]
        else:
            ks = [(f"K_{i}", k) for i, k in enumerate(K_list)]
        for label, K in ks:
            heat = heat_defect(frame, K)
            data = robin_data(frame, chart, K, {q: orbits[q] for q in range(2, opt.q_max + 1)}, heat)
            rec = recover_robin(data, frame, chart, orbits, K.at_zero, opt.recovery)
            xs = np.arange(2048) / 2048.0
            err_sup = float(np.max(np.abs(rec.K_hat(xs) - K(xs))))
            nc = max(len(rec.K_hat.coeffs), len(K.coeffs))
            ca = np.zeros(nc)
            cb = np.zeros(nc)
            ca[: len(rec.K_hat.coeffs)] = rec.K_hat.coeffs
            cb[: len(K.coeffs)] = K.coeffs
            rows.append(
                {
                    "domain": repr(list(coeffs)),
                    "epsilon": eps,
                    "K_label": label,
                    "K0": K.at_zero,
                    "recovery_error_sup": err_sup,
                    "coeff_error_sup": float(np.max(np.abs(ca - cb))),
                    "lstsq_max_diff": rec.lstsq_max_diff,
                    "holdout_residual": rec.holdout_residual,
                    "certificate_numeric": rec.certificate.numeric_norm_completed,
                    "certificate_analytic": rec.certificate.analytic_bound,
                    "certified": rec.certificate.inversion_certified,
                    "passed": rec.certificate.passed,
                }
            )
    return SuiteSummary(
        rows=rows,
        options={
            "frame_samples": opt.frame_samples,
            "q_max": opt.q_max,
            "n_random_K": opt.n_random_K,
            "k_jmax": opt.k_jmax,
            "seed": opt.seed,
            "neumann_order": opt.recovery.neumann_order,
            "gamma": opt.recovery.gamma,
        },
    )
