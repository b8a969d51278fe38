"""Command-line front end.

Subcommands::

    spectrum   secular scan of a graph file            (CSV k,lambda,mult,residual)
    negative   negative eigenvalues -kappa^2           (CSV kappa,lambda,mult,residual)
    weyl       counting-function slope report          (JSON)
    bethe      gaudin | ring | graph two-particle roots (CSV k1,k2,lambda,residual,model)
    oracle     square | pencil finite-difference levels (CSV with extrapolation data)
    bec        sweep | pairs | surface condensation sweeps (CSV + JSON summary)

All quantities are in units hbar = 2 m_e = 1; ``--physical-d-meters`` adds a
physical-unit block (energies in eV for a pair of width d meters, and the
gap relation hbar^2 pi^2 / (m_e d^2)) to JSON summaries.  Exit codes:
0 success, 2 validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .bethe import GraphZSpec, solve_gaudin, solve_graph_pair, solve_lieb_liniger_ring
from .errors import SolverError, ValidationError
from .graphio import load_graph, pair_alpha, write_csv, write_json, write_matrix_coo
from .oracle import DomainSpec, build_operator, extrapolate
from .spectra import negative_spectrum, scan_spectrum, weyl_fit
from .thermo import (
    SurfaceModelSpec,
    pair_condensation,
    spectral_gap_physical,
    surface_model,
    sweep_thermo,
    to_physical_energy,
    EV,
)


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)


def _physical_block(d_model, d_meters, energies):
    return {
        "d_meters": d_meters,
        "spectral_gap_eV": spectral_gap_physical(d_meters),
        "energies_eV": {k: to_physical_energy(v, d_model, d_meters) / EV
                        for k, v in energies.items()},
    }


def cmd_spectrum(args):
    graph, bc, _ = load_graph(args.graph)
    res = scan_spectrum(graph, bc, args.kmax, grid=args.grid, tol=args.tol)
    rows = [(r.k, r.lam, r.multiplicity, r.residual) for r in res.roots]
    text = write_csv(args.out, ("k", "lambda", "multiplicity", "residual"), rows,
                     {"command": "spectrum", "graph": args.graph, "kmax": args.kmax,
                      "grid": res.grid, "tol": res.tol})
    _emit(text, args.out)
    return 0


def cmd_negative(args):
    graph, bc, _ = load_graph(args.graph)
    roots = negative_spectrum(graph, bc, args.kappa_max, tol=args.tol)
    rows = [(r.kappa, r.lam, r.multiplicity, r.residual) for r in roots]
    text = write_csv(args.out, ("kappa", "lambda", "multiplicity", "residual"), rows,
                     {"command": "negative", "graph": args.graph,
                      "kappa_max": args.kappa_max, "tol": args.tol})
    _emit(text, args.out)
    return 0


def cmd_weyl(args):
    graph, bc, _ = load_graph(args.graph)
    res = scan_spectrum(graph, bc, args.kmax, grid=args.grid)
    slope, rel = weyl_fit(res, graph)
    payload = {
        "command": "weyl",
        "graph": args.graph,
        "kmax": args.kmax,
        "eigenvalues_used": int(sum(r.multiplicity for r in res.roots)),
        "slope": slope,
        "target_total_length_over_pi": graph.total_length / np.pi,
        "relative_deviation": rel,
        "version": __version__,
    }
    text = write_json(args.out, payload)
    _emit(text, args.out)
    return 0


def cmd_bethe(args):
    if args.model == "gaudin":
        roots = solve_gaudin(args.length, args.alpha, args.lmax)
        params = {"command": "bethe-gaudin", "length": args.length,
                  "alpha": args.alpha, "lmax": args.lmax}
    elif args.model == "ring":
        roots = solve_lieb_liniger_ring(args.length, args.alpha, args.lmax)
        params = {"command": "bethe-ring", "length": args.length,
                  "alpha": args.alpha, "lmax": args.lmax}
    else:
        graph, bc, extras = load_graph(args.graph)
        alpha = args.alpha if args.alpha is not None else pair_alpha(extras)
        spec = GraphZSpec(graph=graph, bc=bc, alpha=alpha)
        roots = solve_graph_pair(spec, args.lmax)
        params = {"command": "bethe-graph", "graph": args.graph,
                  "alpha": alpha, "lmax": args.lmax}
    rows = [(r.k1, r.k2, r.lam, r.residual, r.model) for r in roots]
    text = write_csv(args.out, ("k1", "k2", "lambda", "residual", "model"), rows, params)
    _emit(text, args.out)
    return 0


def _oracle_spec(args):
    if args.domain == "square":
        return DomainSpec(shape="square", size=args.l, sector=args.sector,
                          sigma=args.sigma, alpha=args.alpha, hardcore=args.hardcore)
    return DomainSpec(shape="pencil-finite" if args.finite else "pencil",
                      size=args.L, d=args.d, sector=args.sector,
                      sigma=args.sigma, alpha=args.alpha, hardcore=args.hardcore)


def cmd_oracle(args):
    spec = _oracle_spec(args)
    base = args.l if args.domain == "square" else args.d
    h_list = [base / n for n in args.h_levels]
    result = extrapolate(spec, args.m, h_list)
    if args.dump_matrix:
        write_matrix_coo(args.dump_matrix, build_operator(spec, min(h_list)))
    finest = result.levels[result.h_list[-1]]
    rows = [
        (n, result.extrapolated[n], result.error_estimate[n],
         result.observed_order[n], bool(result.order_flags[n]), finest[n])
        for n in range(len(result.extrapolated))
    ]
    params = {"command": f"oracle-{args.domain}", "sector": args.sector,
              "sigma": args.sigma, "alpha": args.alpha, "m": args.m,
              "h_levels": ",".join(str(n) for n in args.h_levels),
              "essential_bottom": result.essential_bottom}
    if args.domain == "square":
        params["l"] = args.l
    else:
        params.update({"d": args.d, "L": args.L})
    text = write_csv(args.out, ("n", "lambda_extrapolated", "error_estimate",
                                "observed_order", "order_flagged", "lambda_finest"),
                     rows, params)
    _emit(text, args.out)
    if args.physical_d_meters and args.domain != "square":
        payload = {"command": f"oracle-{args.domain}",
                   "physical": _physical_block(args.d, args.physical_d_meters,
                                               {"E0": float(result.extrapolated[0])})}
        text = write_json(args.out + ".physical.json" if args.out else None, payload)
        _emit(text, args.out)
    return 0


def _sweep_outputs(args, sizes, mus, rho0s, flags, summary):
    csv_path = args.out + ".csv" if args.out else None
    json_path = args.out + ".json" if args.out else None
    rows = list(zip(sizes, mus, rho0s, flags))
    text = write_csv(csv_path, ("size", "mu", "rho0", "condensed_here"), rows,
                     {"command": summary["command"], "beta": summary["beta"],
                      "rho": summary["rho"]})
    _emit(text, csv_path)
    text = write_json(json_path, summary)
    _emit(text, json_path)


def cmd_bec(args):
    from .thermo import CONDENSATION_FRACTION

    if args.model == "sweep":
        graph, bc, _ = load_graph(args.graph)
        res = sweep_thermo(graph, bc, args.beta, args.rho, args.eta)
        summary = {"command": "bec-sweep", "beta": args.beta, "rho": args.rho,
                   "eta": args.eta, "verdict": res.verdict,
                   "limsup_estimate": res.limsup_estimate,
                   "thresholds": res.diagnostics, "version": __version__}
        mus = [st.mu for st in res.states]
    elif args.model == "pairs":
        res = pair_condensation(args.d, args.beta, args.rho, args.sizes,
                                sigma=args.sigma)
        summary = {"command": "bec-pairs", "beta": args.beta, "rho": args.rho,
                   "d": args.d, "sigma": args.sigma, "sizes": args.sizes,
                   "verdict": res.verdict, "limsup_estimate": res.limsup_estimate,
                   "rho_crit_estimate": res.rho_crit_estimate,
                   "version": __version__}
        if args.physical_d_meters:
            summary["physical"] = _physical_block(
                args.d, args.physical_d_meters,
                {"E0": float(res.states[-1].lams[0])})
        mus = [st.mu for st in res.states]
    else:
        spec = SurfaceModelSpec(d=args.d, delta=args.delta, alpha_s=args.alpha_s,
                                lambda_rep=args.lambda_rep)
        res = surface_model(spec, args.beta, args.rho, args.sizes)
        summary = {"command": "bec-surface", "beta": args.beta, "rho": args.rho,
                   "d": args.d, "delta": args.delta, "alpha_s": args.alpha_s,
                   "lambda_rep": args.lambda_rep, "sizes": args.sizes,
                   "verdict": res.verdict, "limsup_estimate": res.limsup_estimate,
                   "rho_s_trace": res.rho_s_trace,
                   "fixed_point_residuals": [st.fixed_point_residual for st in res.states],
                   "diagnostics": res.diagnostics, "version": __version__}
        if args.physical_d_meters:
            summary["physical"] = _physical_block(
                args.d, args.physical_d_meters,
                {"E0": float(res.diagnostics["E0"])})
        mus = [st.mu for st in res.states]
    flags = [r > CONDENSATION_FRACTION * args.rho for r in res.rho0s]
    _sweep_outputs(args, res.sizes, mus, res.rho0s, flags, summary)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="graphgas", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"graphgas {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="one-particle secular scan")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--kmax", type=float, required=True)
    sp.add_argument("--grid", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_spectrum)

    ng = sub.add_parser("negative", help="negative eigenvalues")
    ng.add_argument("--graph", required=True)
    ng.add_argument("--kappa-max", type=float, required=True)
    ng.add_argument("--tol", type=float, default=1e-10)
    ng.add_argument("--out", default=None)
    ng.set_defaults(func=cmd_negative)

    wl = sub.add_parser("weyl", help="counting-function slope report")
    wl.add_argument("--graph", required=True)
    wl.add_argument("--kmax", type=float, required=True)
    wl.add_argument("--grid", type=float, default=None)
    wl.add_argument("--out", default=None)
    wl.set_defaults(func=cmd_weyl)

    be = sub.add_parser("bethe", help="two-particle Bethe roots")
    bsub = be.add_subparsers(dest="model", required=True)
    for name in ("gaudin", "ring"):
        bp = bsub.add_parser(name)
        bp.add_argument("--length", type=float, required=True)
        bp.add_argument("--alpha", type=float, required=True)
        bp.add_argument("--lmax", type=float, required=True)
        bp.add_argument("--out", default=None)
        bp.set_defaults(func=cmd_bethe, model=name)
    bg = bsub.add_parser("graph")
    bg.add_argument("--graph", required=True)
    bg.add_argument("--alpha", type=float, default=None,
                    help="overrides the graph file's pair_interactions.alpha")
    bg.add_argument("--lmax", type=float, required=True)
    bg.add_argument("--out", default=None)
    bg.set_defaults(func=cmd_bethe, model="graph")

    orc = sub.add_parser("oracle", help="finite-difference eigenvalues")
    osub = orc.add_subparsers(dest="domain", required=True)
    for name in ("square", "pencil"):
        op = osub.add_parser(name)
        if name == "square":
            op.add_argument("--l", type=float, required=True)
        else:
            op.add_argument("--d", type=float, required=True)
            op.add_argument("--L", type=float, required=True)
            op.add_argument("--finite", action="store_true",
                            help="treat L as the physical box, not a truncation")
        op.add_argument("--h-levels", type=_int_list, default=[8, 16, 32],
                        help="divisor counts n; grid steps are l/n (square) or d/n (pencil)")
        op.add_argument("--sector", choices=("none", "bosonic", "fermionic"),
                        default="none" if name == "square" else "fermionic")
        op.add_argument("--sigma", type=float, default=0.0)
        op.add_argument("--alpha", type=float, default=0.0)
        op.add_argument("--hardcore", action="store_true")
        op.add_argument("--m", type=int, default=6)
        op.add_argument("--dump-matrix", default=None,
                        help="write the finest operator in 'row col value' form")
        op.add_argument("--physical-d-meters", type=float, default=None)
        op.add_argument("--out", default=None)
        op.set_defaults(func=cmd_oracle, domain=name)

    bc = sub.add_parser("bec", help="condensation sweeps")
    csub = bc.add_subparsers(dest="model", required=True)
    sw = csub.add_parser("sweep")
    sw.add_argument("--graph", required=True)
    sw.add_argument("--beta", type=float, required=True)
    sw.add_argument("--rho", type=float, required=True)
    sw.add_argument("--eta", type=_float_list, required=True)
    sw.add_argument("--out", default=None)
    sw.set_defaults(func=cmd_bec, model="sweep")
    pr = csub.add_parser("pairs")
    pr.add_argument("--d", type=float, required=True)
    pr.add_argument("--beta", type=float, required=True)
    pr.add_argument("--rho", type=float, required=True)
    pr.add_argument("--sizes", type=_float_list, required=True)
    pr.add_argument("--sigma", type=float, default=0.0)
    pr.add_argument("--physical-d-meters", type=float, default=None)
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_bec, model="pairs")
    sf = csub.add_parser("surface")
    sf.add_argument("--d", type=float, required=True)
    sf.add_argument("--beta", type=float, required=True)
    sf.add_argument("--rho", type=float, required=True)
    sf.add_argument("--sizes", type=_float_list, required=True)
    sf.add_argument("--delta", type=float, required=True)
    sf.add_argument("--lambda-rep", type=float, required=True)
    sf.add_argument("--alpha-s", type=float, required=True)
    sf.add_argument("--physical-d-meters", type=float, default=None)
    sf.add_argument("--out", default=None)
    sf.set_defaults(func=cmd_bec, model="surface")

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"graphgas: validation error: {exc}", file=sys.stderr)
        if getattr(exc, "report", None):
            print(exc.report, file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"graphgas: solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
