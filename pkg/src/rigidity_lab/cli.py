"""Command-line front end.

Subcommands bind the modules into reproducible experiments: frame dumps,
orbit tables, invariant synthesis, operator certification, reconstruction,
and the batch acceptance suite. Outputs are deterministic (fixed summation
orders, seeded randomness, repr-formatted floats), so identical configs
produce byte-identical files.

Exit codes: 0 success, 1 input/usage error, 2 certificate failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import billiards, functionals, geometry, reconstruction, traces
from . import operator as operator_mod
from .errors import NotContractiveError, RigidityError

DEFAULT_LADDER = (8, 16, 32, 64)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_coeffs(text: str):
    text = text.strip()
    if not text:
        return []
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_int_list(text: str):
    return [int(tok) for tok in text.replace(",", " ").split()]


def _load_profile(args):
    if getattr(args, "domain", None):
        profile, n = geometry.load_domain_spec(args.domain)
        if getattr(args, "frame", None):
            n = args.frame
        return profile, n
    coeffs = _parse_coeffs(args.coeffs if args.coeffs is not None else "")
    return geometry.build_profile(coeffs), (args.frame or geometry.DEFAULT_FRAME_SAMPLES)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("RIGIDITY_LAB_THREADS")
    return int(env) if env else 1


def _out_path(args, name: str) -> str:
    out = getattr(args, "out", None) or "."
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, name)


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _csv_text(columns: dict) -> str:
    names = list(columns)
    rows = len(next(iter(columns.values())))
    lines = [",".join(names)]
    for i in range(rows):
        lines.append(",".join(repr(float(columns[c][i])) for c in names))
    return "\n".join(lines) + "\n"


def _apply_config(args, parser_dests):
    path = getattr(args, "config", None)
    if not path:
        return args
    with open(path) as fh:
        payload = json.load(fh)
    unknown = set(payload) - parser_dests
    if unknown:
        raise _UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, val in payload.items():
        if getattr(args, key, None) in (None, False):
            setattr(args, key, val)
    return args


# -- subcommands ----------------------------------------------------------------


def cmd_domain(args) -> int:
    profile, n = _load_profile(args)
    frame = geometry.build_frame(profile, n)
    if args.action == "dump":
        if getattr(args, "format", "csv") == "json":
            payload = {k: [float(v) for v in col] for k, col in frame.table().items()}
            path = _out_path(args, "frame.json")
            _write_text(path, _json_text(payload))
        else:
            path = _out_path(args, "frame.csv")
            _write_text(path, _csv_text(frame.table()))
        print(f"wrote {path} (N={n}, perimeter={frame.perimeter!r})")
    else:
        rep = geometry.closeness_report(frame)
        payload = {
            "eps": rep.eps,
            "eps_all": rep.eps_all,
            "derivative_sup": list(rep.derivative_sup),
            "perimeter": frame.perimeter,
            "lazutkin_const": frame.lazutkin_const,
        }
        path = _out_path(args, "closeness.json")
        _write_text(path, _json_text(payload))
        print(f"wrote {path} (eps={rep.eps!r})")
    return 0


def cmd_orbits(args) -> int:
    profile, n = _load_profile(args)
    frame = geometry.build_frame(profile, n)
    qs = sorted(set(range(2, args.q_max + 1)) | set(args.q_ladder or []))
    orbits = billiards.compute_orbits(frame, qs, threads=_threads(args))
    cols = {k: [] for k in ("q", "k", "theta_k", "sigma_k", "x_k", "phi_k",
                            "length", "poincare_trace", "nondegenerate")}
    for q in qs:
        orb = orbits[q]
        pd = billiards.linearized_poincare(frame, orb)
        for k in range(q):
            cols["q"].append(q)
            cols["k"].append(k)
            cols["theta_k"].append(orb.theta[k])
            cols["sigma_k"].append(orb.sigma[k])
            cols["x_k"].append(orb.x[k])
            cols["phi_k"].append(orb.phi[k])
            cols["length"].append(orb.length)
            cols["poincare_trace"].append(pd.trace)
            cols["nondegenerate"].append(float(pd.nondegenerate))
    path = _out_path(args, "orbits.csv")
    _write_text(path, _csv_text(cols))
    print(f"wrote {path} ({len(qs)} orbits)")
    return 0


def cmd_invariants(args) -> int:
    profile, n = _load_profile(args)
    frame = geometry.build_frame(profile, n)
    K = functionals.CosineSeries(_parse_coeffs(args.robin_coeffs))
    orbits = billiards.compute_orbits(frame, range(2, args.q_max + 1), threads=_threads(args))
    heat = traces.heat_defect(frame, K)
    data = functionals.robin_data(frame, frame.chart, K, orbits, heat)
    path = _out_path(args, "invariants.json")
    _write_text(path, _json_text(data.to_json_dict()))
    print(f"wrote {path} (q_max={data.q_max})")
    return 0


def cmd_operator(args) -> int:
    params = operator_mod.GammaSpaceParams(gamma=args.gamma, J=args.jmax, Q=args.q_max)
    have_domain = args.coeffs is not None or args.domain
    if args.action == "certify" and not have_domain:
        cert = operator_mod.contraction_certificate(
            None, None, params, eps=args.epsilon or 0.0, c_constant=args.c_constant
        )
    else:
        profile, n = _load_profile(args)
        frame = geometry.build_frame(profile, n)
        orbits = billiards.compute_orbits(
            frame, sorted(set(range(2, args.q_max + 1)) | set(DEFAULT_LADDER)),
            threads=_threads(args),
        )
        cert = operator_mod.contraction_certificate(
            frame, frame.chart, params, eps=args.epsilon,
            orbits=orbits, c_constant=args.c_constant,
        )
        if args.action == "assemble":
            T = operator_mod.assemble_T(frame, frame.chart, orbits, params)
            lines = ["q\\j," + ",".join(str(int(j)) for j in T.col_j)]
            for i, q in enumerate(T.row_q):
                lines.append(
                    f"{int(q)}," + ",".join(repr(float(v)) for v in T.entries[i])
                )
            _write_text(_out_path(args, "matrix.csv"), "\n".join(lines) + "\n")
    _write_text(_out_path(args, "certificate.json"), _json_text(cert.to_json_dict()))
    status = "PASS" if cert.passed else "FAIL"
    numeric = "" if cert.numeric_norm_completed is None else (
        f" numeric_norm={cert.numeric_norm_completed!r}"
    )
    print(f"analytic_bound={cert.analytic_bound!r}{numeric} {status}")
    if not cert.passed and cert.numeric_norm_completed is not None and cert.inversion_certified:
        print("numeric contraction holds; analytic constant route fails at this eps")
    return 0 if cert.passed else 2


def cmd_reconstruct(args) -> int:
    profile, n = _load_profile(args)
    frame = geometry.build_frame(profile, n)
    data = functionals.InvariantVector.load(args.data)
    orbits = billiards.compute_orbits(
        frame,
        sorted(set(range(2, data.q_max + 1)) | set(DEFAULT_LADDER)),
        threads=_threads(args),
    )
    options = reconstruction.RecoveryOptions(
        gamma=args.gamma,
        jmax=args.jmax,
        neumann_order=args.neumann_order,
        residual_tol=args.tol,
        override_certificate=args.override_certificate,
        strict_residual=not args.no_strict,
    )
    try:
        res = reconstruction.recover_robin(data, frame, frame.chart, orbits, args.k0, options)
    except NotContractiveError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 2
    payload = {
        "K_hat_cosine_coeffs": [float(c) for c in res.K_hat.coeffs],
        "v_coeffs": [float(c) for c in res.v.coeffs],
        "second_order_value": res.second_order_value,
        "solve_residual": res.solve_residual,
        "holdout_residual": res.holdout_residual,
        "marked_residual": res.marked_residual,
        "data_marked_gap": res.data_marked_gap,
        "heat_residual": list(res.heat_residual),
        "lstsq_max_diff": res.lstsq_max_diff,
        "certificate": res.certificate.to_json_dict(),
    }
    path = _out_path(args, "reconstruction.json")
    _write_text(path, _json_text(payload))
    print(f"wrote {path} (solve_residual={res.solve_residual!r})")
    return 0


def cmd_suite(args) -> int:
    if args.grid == "default":
        domains = [[], [0.0, 0.0, 0.005], [0.0, 0.0, 0.01]]
    else:
        domains = [[], [0.0, 0.0, 0.01]]
    options = reconstruction.SuiteOptions(
        frame_samples=args.frame or geometry.DEFAULT_FRAME_SAMPLES,
        q_max=args.q_max,
        n_random_K=args.n_random,
        seed=args.seed,
        recovery=reconstruction.RecoveryOptions(neumann_order=args.neumann_order),
    )
    summary = reconstruction.rigidity_suite(domains, None, options)
    _write_text(_out_path(args, "suite.json"), summary.to_json() + "\n")
    _write_text(_out_path(args, "suite.csv"), summary.to_csv_text())
    print(f"suite rows={len(summary.rows)} max_error={summary.max_error!r}")
    return 0


# -- parser -----------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="rigidity-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, domain=True):
        sp.add_argument("--config", help="JSON file with defaults for this command")
        sp.add_argument("--out", help="output directory (default: cwd)")
        sp.add_argument("--threads", type=int, help="worker cap (env RIGIDITY_LAB_THREADS)")
        sp.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="table output format where applicable")
        if domain:
            sp.add_argument("--domain", help="domain spec JSON file")
            sp.add_argument("--coeffs", help="radial cosine coefficients, e.g. '0,0,0.01'")
            sp.add_argument("--frame", type=int, help="frame sample count (default 512)")

    sp = sub.add_parser("domain", help="frame dump or closeness report")
    common(sp)
    sp.add_argument("action", choices=["dump", "report"])
    sp.set_defaults(fn=cmd_domain)

    sp = sub.add_parser("orbits", help="orbit table CSV")
    common(sp)
    sp.add_argument("--q-max", type=int, default=16, dest="q_max")
    sp.add_argument("--q-ladder", type=_parse_int_list, default=list(DEFAULT_LADDER), dest="q_ladder")
    sp.set_defaults(fn=cmd_orbits)

    sp = sub.add_parser("invariants", help="forward-synthesized invariant vector")
    common(sp)
    sp.add_argument("--robin-coeffs", required=True, dest="robin_coeffs",
                    help="cosine coefficients of the Robin function")
    sp.add_argument("--q-max", type=int, default=16, dest="q_max")
    sp.set_defaults(fn=cmd_invariants)

    sp = sub.add_parser("operator", help="matrix assembly / contraction certificate")
    common(sp)
    sp.add_argument("action", choices=["certify", "assemble"])
    sp.add_argument("--gamma", type=float, default=3.5)
    sp.add_argument("--jmax", type=int, default=48)
    sp.add_argument("--q-max", type=int, default=16, dest="q_max")
    sp.add_argument("--epsilon", type=float, help="weight offset (default: measured)")
    sp.add_argument("--c-constant", type=float, default=operator_mod.DEFAULT_C_CONSTANT,
                    dest="c_constant")
    sp.set_defaults(fn=cmd_operator)

    sp = sub.add_parser("reconstruct", help="recover the Robin function from data")
    common(sp)
    sp.add_argument("--data", required=True, help="invariant vector JSON")
    sp.add_argument("--k0", type=float, required=True, help="marked-point value of K")
    sp.add_argument("--gamma", type=float, default=3.5)
    sp.add_argument("--jmax", type=int, default=None)
    sp.add_argument("--neumann-order", type=int, default=40, dest="neumann_order")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--override-certificate", action="store_true", dest="override_certificate")
    sp.add_argument("--no-strict", action="store_true", dest="no_strict")
    sp.set_defaults(fn=cmd_reconstruct)

    sp = sub.add_parser("suite", help="batch forward/inverse acceptance harness")
    common(sp)
    sp.add_argument("action", choices=["acceptance"])
    sp.add_argument("--grid", choices=["default", "small"], default="default")
    sp.add_argument("--q-max", type=int, default=16, dest="q_max")
    sp.add_argument("--n-random", type=int, default=20, dest="n_random")
    sp.add_argument("--seed", type=int, default=2024)
    sp.add_argument("--neumann-order", type=int, default=40, dest="neumann_order")
    sp.set_defaults(fn=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        dests = {a.dest for sp in parser._subparsers._group_actions
                 for a in getattr(sp.choices.get(args.command), "_actions", [])}
        args = _apply_config(args, dests)
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (RigidityError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
