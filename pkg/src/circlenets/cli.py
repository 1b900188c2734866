"""Command-line front end: principal directions, net building and convergence sweeps."""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import harness
from .catalog import make_surface
from .constructions import euclidean_principal, moebius_principal, triple_around
from .errors import GeometryError, UmbilicRegion
from .nets import (
    build_circular_net,
    build_conjugate_onsurface,
    build_conjugate_projection,
    deviation_report,
    net_quad_defects,
)
from .surface import is_umbilic

BUILDERS = {
    "projection": build_conjugate_projection,
    "onsurface": build_conjugate_onsurface,
    "circular": build_circular_net,
}


def _pair(text):
    try:
        u, v = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'u,v', got %r" % text) from None
    return u, v


def _positive(text):
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive: %r" % text)
    return x


def _write_json(path, record):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=1)


def cmd_principal(args):
    s = make_surface(args.surface)
    if is_umbilic(s, args.uv):
        raise UmbilicRegion("base point uv=%r is umbilic" % (args.uv,))
    if args.method == "euclidean":
        A, B, C = triple_around(s, args.uv, args.eps, tuple(args.angles))
        est = euclidean_principal(s, A, B, C)
    else:
        R = args.radius or harness.mean_curvature_radius(s, args.uv)
        est = moebius_principal(s, args.uv, R, args.eps)
    rec = dict(est.to_record(), method=args.method, surface=args.surface, eps=args.eps)
    _write_json(args.out, rec)
    print("angle_err_1 %.3e  angle_err_2 %.3e" % (est.angle_err_1, est.angle_err_2))
    return 0


def cmd_build_net(args):
    s = make_surface(args.surface)
    net = BUILDERS[args.kind](s, args.uv, args.eps, args.n)
    rep = deviation_report(net, s)
    _, quads = net_quad_defects(net)
    os.makedirs(args.out, exist_ok=True)
    net.to_obj(os.path.join(args.out, "net.obj"))
    net.to_json(os.path.join(args.out, "net.json"))
    rep.to_csv(os.path.join(args.out, "deviations.csv"))
    summary = {"kind": args.kind, "surface": args.surface, "eps": args.eps,
               "dims": [int(x) for x in net.dims],
               "planarity_max": quads["planarity_height"]["max"],
               "circularity_max": quads["circularity"]["max"],
               "deviation_max": rep.aggregates["all"]["dist"]["max"],
               "du_max": rep.aggregates["all"]["du"]["max"],
               "dv_max": rep.aggregates["all"]["dv"]["max"],
               "foot_point_failures": rep.aggregates["failed"]}
    _write_json(os.path.join(args.out, "summary.json"), summary)
    print(json.dumps(summary))
    return 0


def _run_one(eid):
    return harness.run_experiment(harness.get_experiment(eid))


def cmd_sweep(args):
    ids = sorted(harness.REGISTRY) if args.experiment == "all" else [args.experiment]
    for eid in ids:
        harness.get_experiment(eid)
    if args.jobs > 1 and len(ids) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_one, ids))
    else:
        results = [_run_one(eid) for eid in ids]
    gate_ok = True
    for res in results:
        res.write(args.out)
        print(res.summary())
        gate_ok &= res.passed or not res.spec.gating
    _write_json(os.path.join(args.out, "summary.json"),
                {"experiments": [{"id": r.spec.id, "pass": r.passed, "gating": r.spec.gating,
                                  "status": r.status} for r in results],
                 "gate": bool(gate_ok)})
    return 0 if gate_ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="circlenets", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("principal", help="estimate principal directions from circles")
    q.add_argument("--surface", required=True, help="catalog spec, e.g. torus:R=2,r=1")
    q.add_argument("--uv", type=_pair, default=(0.0, 0.0), help="base point 'u,v' (default 0,0)")
    q.add_argument("--eps", type=_positive, default=0.05, help="patch size (default 0.05)")
    q.add_argument("--method", choices=("euclidean", "moebius"), default="moebius")
    q.add_argument("--radius", type=_positive, default=None,
                   help="tangent sphere radius for moebius (default 2/|K1+K2|)")
    q.add_argument("--angles", type=float, nargs=3, default=(0.3, 1.9, 3.4),
                   help="polar angles of A, B, C for euclidean (default 0.3 1.9 3.4)")
    q.add_argument("--out", default="principal.json", help="JSON report path")
    q.set_defaults(func=cmd_principal)

    b = sub.add_parser("build-net", help="build a discrete net and its deviation tables")
    b.add_argument("--kind", choices=sorted(BUILDERS), required=True)
    b.add_argument("--surface", required=True)
    b.add_argument("--uv", type=_pair, default=(0.0, 0.0), help="grid origin 'u,v' (default 0,0)")
    b.add_argument("--eps", type=_positive, default=0.1, help="grid step (default 0.1)")
    b.add_argument("--n", type=int, default=10, help="quads per side (default 10)")
    b.add_argument("--out", default="net", help="output directory (default net/)")
    b.set_defaults(func=cmd_build_net)

    w = sub.add_parser("sweep", help="run registered convergence experiments")
    w.add_argument("--experiment", default="all", help="experiment id or 'all'")
    w.add_argument("--out", default="report", help="output directory (default report/)")
    w.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GeometryError as exc:
        print("%s: %s" % (exc.name, exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
