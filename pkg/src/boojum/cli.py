"""Command-line front end.

The CLI is a thin client of the service layer: each subcommand builds the
same pydantic request the HTTP API accepts and either calls the handler in
process (default) or posts it to a running server (``--server URL``).
Numeric output is written with 17 significant digits so reruns are
bit-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .errors import BoojumError
from .schemas import (
    AbmapRequest,
    DLambdaRequest,
    RecoveryFinRequest,
    RecoveryInfRequest,
    ScanRequest,
    SphereRequest,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dispatch(path: str, request, server: str | None) -> dict:
    if server:
        import httpx

        resp = httpx.post(
            server.rstrip("/") + path,
            json=request.model_dump(mode="json", by_alias=True),
            timeout=None,
        )
        if resp.status_code != 200:
            raise BoojumError(f"server returned {resp.status_code}: {resp.text}")
        return resp.json()
    from . import service

    handlers = {
        "/dlambda": service.run_dlambda,
        "/sphere-integral": service.run_sphere,
        "/scan": service.run_scan,
        "/abmap": service.run_abmap,
        "/recovery/inf": service.run_recovery_inf,
        "/recovery/fin": service.run_recovery_fin,
    }
    return handlers[path](request).model_dump(mode="json", by_alias=True)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--server", default=None, help="base URL of a running service")
    p.add_argument("--seed", type=int, default=0, help="recorded in the output header")


def _add_grid(p: argparse.ArgumentParser, n_default: int) -> None:
    p.add_argument("--grid-length", type=float, default=12.0)
    p.add_argument("--grid-nodes", type=int, default=n_default)


def build_parser() -> _Parser:
    parser = _Parser(prog="boojum", description="Boundary-layer energy toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dlambda", parents=[], help="minimal transition energy for a boundary tensor")
    p.add_argument("--lambda", dest="lam", required=True, help="coupling (number or 'inf')")
    p.add_argument("--v3", type=float, default=None, help="third component of the start director")
    p.add_argument("--q0", default=None, help="comma-separated Q11,Q12,Q13,Q22,Q23")
    _add_grid(p, 1537)
    _add_common(p)

    p = sub.add_parser("sphere", help="integrate the energy density over the sphere")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument(
        "--bc",
        default="longitudinal",
        choices=["longitudinal", "tangent-angle", "radial-reference", "zero"],
    )
    p.add_argument("--psi", type=float, default=0.0)
    p.add_argument("--nphi", type=int, default=64)
    p.add_argument("--density", default="auto", choices=["auto", "exact-inf", "minimized"])
    _add_grid(p, 385)
    _add_common(p)

    p = sub.add_parser("scan", help="scan tangent directions at a surface point")
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--ndirs", type=int, default=32)
    p.add_argument("--solver", default="auto", choices=["auto", "full"])
    _add_grid(p, 385)
    _add_common(p)

    p = sub.add_parser("abmap", help="trace-polynomial heatmap over the two angles")
    p.add_argument("--v3", type=float, default=0.5)
    p.add_argument("--res", type=int, default=200)
    p.add_argument("--no-paths", action="store_true", help="skip the solved overlay paths")
    _add_grid(p, 385)
    _add_common(p)

    p = sub.add_parser("recovery", help="region energies of a recovery construction")
    p.add_argument("--mode", required=True, choices=["inf", "fin"])
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--lambda", dest="lam", default="1", help="coupling (fin mode)")
    p.add_argument("--h", type=float, default=0.2)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--nquad", type=int, default=None)
    p.add_argument("--segment-nodes", type=int, default=257)
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _cmd_dlambda(args) -> int:
    if (args.v3 is None) == (args.q0 is None):
        raise ValueError("provide exactly one of --v3 or --q0")
    q0_upper = [float(x) for x in args.q0.split(",")] if args.q0 else None
    req = DLambdaRequest(
        lam=args.lam,
        v3=args.v3,
        q0_upper=q0_upper,
        grid={"length": args.grid_length, "n_nodes": args.grid_nodes},
    )
    out = _dispatch("/dlambda", req, args.server)
    out["seed"] = args.seed
    _write(args.out, json.dumps(out, indent=2))
    return EXIT_OK if out["converged"] else EXIT_SOLVER


def _cmd_sphere(args) -> int:
    req = SphereRequest(
        lam=args.lam,
        bc=args.bc,
        psi=args.psi,
        n_phi=args.nphi,
        density=args.density,
        grid={"length": args.grid_length, "n_nodes": args.grid_nodes},
    )
    out = _dispatch("/sphere-integral", req, args.server)
    out["seed"] = args.seed
    _write(args.out, json.dumps(out, indent=2))
    return EXIT_OK


def _cmd_scan(args) -> int:
    req = ScanRequest(
        lam=args.lam,
        phi=args.phi,
        theta=args.theta,
        n_dirs=args.ndirs,
        solver=args.solver,
        grid={"length": args.grid_length, "n_nodes": args.grid_nodes},
    )
    out = _dispatch("/scan", req, args.server)
    lines = [
        "# "
        + json.dumps(
            {
                "schema_version": out["schema_version"],
                "lambda": out["lambda"],
                "point": out["point"],
                "best_psi": out["best_psi"],
                "seed": args.seed,
            }
        ),
        "psi,D",
    ]
    lines += [f"{_fmt(a)},{_fmt(b)}" for a, b in out["table"]]
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_abmap(args) -> int:
    req = AbmapRequest(
        v3=args.v3,
        resolution=args.res,
        include_paths=not args.no_paths,
        grid={"length": args.grid_length, "n_nodes": args.grid_nodes},
    )
    out = _dispatch("/abmap", req, args.server)
    header = {"schema_version": out["schema_version"], "v3": out["v3"], "seed": args.seed}
    lines = ["# " + json.dumps(header), "alpha,beta,T_value,uniaxial_flag"]
    alphas, betas = out["alpha"], out["beta"]
    for i, a in enumerate(alphas):
        row_t = out["trace_values"][i]
        row_f = out["uniaxial_flags"][i]
        for j, b in enumerate(betas):
            lines.append(f"{_fmt(a)},{_fmt(b)},{_fmt(row_t[j])},{row_f[j]}")
    _write(args.out, "\n".join(lines) + "\n")
    if out["paths"] and args.out not in (None, "-"):
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        plines = ["# " + json.dumps(header), "series,t,alpha,beta"]
        for name, series in out["paths"].items():
            for t, a, b in zip(series["t"], series["alpha"], series["beta"]):
                plines.append(f"{name},{_fmt(t)},{_fmt(a)},{_fmt(b)}")
        _write(stem + "_paths.csv", "\n".join(plines) + "\n")
    return EXIT_OK


def _cmd_recovery(args) -> int:
    if args.mode == "inf":
        req = RecoveryInfRequest(eta=args.eta, n_quad=args.nquad or 128)
        out = _dispatch("/recovery/inf", req, args.server)
    else:
        req = RecoveryFinRequest(
            lam=args.lam,
            eta=args.eta,
            h=args.h,
            eps=args.eps,
            xi=args.xi,
            n_quad=args.nquad or 96,
            segment_grid={"length": 12.0, "n_nodes": args.segment_nodes},
        )
        out = _dispatch("/recovery/fin", req, args.server)
    out["seed"] = args.seed
    _write(args.out, json.dumps(out, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "dlambda":
            return _cmd_dlambda(args)
        if args.command == "sphere":
            return _cmd_sphere(args)
        if args.command == "scan":
            return _cmd_scan(args)
        if args.command == "abmap":
            return _cmd_abmap(args)
        if args.command == "recovery":
            return _cmd_recovery(args)
        if args.command == "serve":
            import uvicorn

            from .service import app

            uvicorn.run(app, host=args.host, port=args.port)
            return EXIT_OK
    except (ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except BoojumError as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
