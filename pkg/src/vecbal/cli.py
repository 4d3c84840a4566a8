"""Command line entry point: ``vecbal <command> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys

from . import bench, io, theory
from .core import brute_force_min, discrepancy
from .dist import parse_density, sample_instance
from .errors import VecbalError
from .gkk import GkkConfig, gkk_run
from .reduce import reduce_bound, reduce_full
from .rng import RngStream


def _emit(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_reduce(args):
    X = io.read_instance(args.instance)
    res = reduce_full(X)
    rep = discrepancy(X, res.signing)
    print(str(res.signing))
    print(f"sup_norm {rep.sup_norm!r}")
    print(f"bound {reduce_bound(X)!r}")
    if args.out:
        io.write_signing(args.out, res.signing)
    return 0 if rep.sup_norm <= res.bound * (1 + 1e-12) else 1


def cmd_oracle(args):
    X = io.read_instance(args.instance)
    rep = brute_force_min(X, cap=args.cap)
    print(str(rep.signing))
    print(f"sup_norm {rep.sup_norm!r}")
    return 0


def cmd_gkk_run(args):
    X = io.read_instance(args.instance)
    rho = parse_density(args.density, X.count)
    cfg = GkkConfig(gamma=args.gamma, phase_cap=args.phases, min_set_size=args.min_set_size)
    res = gkk_run(X, rho, cfg, RngStream(args.seed))
    _emit(res.to_dict(), args.out)
    if args.signing:
        io.write_signing(args.signing, res.signing)
    return 0


def cmd_sample(args):
    rho = parse_density(args.density, args.n)
    X = sample_instance(rho, args.m, args.n, RngStream(args.seed))
    io.write_instance(args.out, X)
    return 0


def _query(args):
    return theory.MomentQuery(args.n, args.m, gamma=args.gamma, eps=args.eps)


def cmd_moments(args):
    q = _query(args)
    out = {"n": q.n, "m": q.m, "log_epsilon": q.log_eps, "first_moment_log": theory.first_moment_log(q)}
    if q.n <= q.cap:
        out["second_moment_log"] = theory.second_moment_log(q)
        out["ratio"] = math.exp(out["second_moment_log"] - 2 * out["first_moment_log"])
    _emit(out, None)
    return 0


def cmd_phi(args):
    eps = args.eps if args.eps is not None else 1.0 / args.n
    prof = theory.phi_profile(theory.MomentQuery(args.n, args.m, eps=eps), grid_size=args.grid)
    if args.out:
        prof.write_csv(args.out)
    else:
        for a, v in zip(prof.alphas, prof.values):
            print(f"{a!r},{v!r}")
    print(
        f"# concave={prof.is_concave()} argmax={prof.argmax_alpha} symmetry={prof.symmetry_error():.3e}",
        file=sys.stderr,
    )
    return 0


def cmd_cdelta(args):
    print(repr(theory.c_delta(args.delta)))
    return 0


def cmd_bench_compare(args):
    cfg = bench.RunConfig.from_file(args.config)
    _, summary = bench.compare(cfg, args.out_dir)
    rv = summary["reverify"]
    print(f"wrote {args.out_dir}; re-verified {rv['checked']} records, {rv['mismatches']} mismatches")
    return 0 if rv["mismatches"] == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vecbal", description="Vector balancing by multi-dimensional differencing.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", help="sign an instance by fractional rounding")
    r.add_argument("--instance", required=True)
    r.add_argument("--out", help="write the signing here")
    r.set_defaults(func=cmd_reduce)

    o = sub.add_parser("oracle", help="exact minimum by enumeration (small n)")
    o.add_argument("--instance", required=True)
    o.add_argument("--cap", type=int, default=26)
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gkk", help="multi-phase differencing")
    gsub = g.add_subparsers(dest="gkk_command", required=True)
    gr = gsub.add_parser("run")
    gr.add_argument("--instance", required=True)
    gr.add_argument("--density", required=True, help="e.g. uniform:1, triangular:1, gaussian, tabulated:file.csv")
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--gamma", type=float)
    gr.add_argument("--phases", type=int)
    gr.add_argument("--min-set-size", type=int)
    gr.add_argument("--out", help="JSON result (stdout if omitted)")
    gr.add_argument("--signing", help="also write the +/- signing line here")
    gr.set_defaults(func=cmd_gkk_run)

    s = sub.add_parser("sample", help="draw a random instance")
    s.add_argument("--density", default="uniform:1")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    t = sub.add_parser("theory", help="threshold and moment numerics")
    tsub = t.add_subparsers(dest="theory_command", required=True)
    tm = tsub.add_parser("moments")
    tm.add_argument("--n", type=int, required=True)
    tm.add_argument("--m", type=int, required=True)
    grp = tm.add_mutually_exclusive_group(required=True)
    grp.add_argument("--gamma", type=float)
    grp.add_argument("--eps", type=float)
    tm.set_defaults(func=cmd_moments)
    tp = tsub.add_parser("phi")
    tp.add_argument("--n", type=int, required=True)
    tp.add_argument("--m", type=int, required=True)
    tp.add_argument("--eps", type=float, help="default 1/n")
    tp.add_argument("--grid", type=int, default=101)
    tp.add_argument("--out", help="CSV with columns alpha,phi")
    tp.set_defaults(func=cmd_phi)
    tc = tsub.add_parser("cdelta")
    tc.add_argument("--delta", type=float, required=True)
    tc.set_defaults(func=cmd_cdelta)

    b = sub.add_parser("bench", help="seeded signer comparisons")
    bsub = b.add_subparsers(dest="bench_command", required=True)
    bc = bsub.add_parser("compare")
    bc.add_argument("--config", required=True)
    bc.add_argument("--out-dir", required=True)
    bc.set_defaults(func=cmd_bench_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (VecbalError, OSError) as exc:
        print(f"vecbal: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
