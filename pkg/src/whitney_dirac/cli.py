"""Command line entry point: every subcommand emits one deterministic JSON report.

Exit codes: 0 when all hard checks pass, 1 on a numerical failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np
from threadpoolctl import threadpool_limits

SCHEMA = "whitney-dirac/report-1"


class ConfigError(ValueError):
    pass


# parsing helpers ---------------------------------------------------------------


def _int_list(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from exc


def _float_list(text: str | None) -> list[float] | None:
    if text is None:
        return None
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma separated list of numbers, got {text!r}") from exc


def _lengths(args) -> tuple[float, ...]:
    L = _float_list(args.lengths) or [1.0]
    if len(L) == 1:
        L = L * args.n
    if len(L) != args.n:
        raise ConfigError(f"--lengths needs 1 or {args.n} values, got {len(L)}")
    return tuple(L)


def _lattice(args, m: int):
    from .mesh import Lattice

    return Lattice(args.n, _lengths(args), (m,) * args.n)


def _m_list(args, default: list[int]) -> list[int]:
    ms = _int_list(args.m_list)
    if ms is None:
        ms = [args.m] if args.m is not None else default
    if not ms:
        raise ConfigError("--m-list is empty")
    for m in ms:
        _lattice(args, m)  # validates m >= 3
    return ms


def _complexes(args, ms: list[int]):
    from .whitney import assemble_complex

    return [assemble_complex(_lattice(args, m)) for m in ms]


def _mesh_block(args, ms: list[int]) -> dict:
    return {"n": args.n, "lengths": list(_lengths(args)), "m": ms}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


# subcommands ---------------------------------------------------------------------


def cmd_mesh(args) -> dict:
    from .mesh import mesh_info, simplex_counts
    from .whitney import assemble_complex

    m = args.m if args.m is not None else 4
    cx = assemble_complex(_lattice(args, m))
    info = mesh_info(cx.mesh)
    bd = cx.mesh.boundary_defects()
    cd = cx.coboundary_defects()
    checks = {
        "boundary_squared_zero": all(v == 0 for v in bd),
        "d_squared_zero": all(v == 0 for v in cd),
        "betti_binomial": info["betti"] == [math.comb(args.n, k) for k in range(args.n + 1)],
        "euler_zero": info["chi"] == 0,
        "closed_form_counts": args.n != len(set(_lengths(args))) or info["counts"] == simplex_counts(args.n, m),
    }
    return {"mesh": _mesh_block(args, [m]), "params": {}, "info": info,
            "defects": {"boundary": bd, "coboundary": cd}, "checks": checks}


def _potential(args):
    from .dirac import potential_catalog

    try:
        return potential_catalog(args.potential, args.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _oracle(args, potential):
    """Torus oracle when the perturbation is a mass and a constant shift; otherwise None."""
    from .spectra import torus_dirac_oracle

    if potential is not None and not isinstance(potential, float):
        return None, 0.0
    shift = args.shift + (potential or 0.0)
    return torus_dirac_oracle(args.n, _lengths(args), args.mass), shift


def cmd_eig(args) -> dict:
    from .dirac import assemble_dirac, perturbed_operator
    from .spectra import cluster, generalized_symmetric_eig

    if args.count < 1:
        raise ConfigError("--count must be positive")
    m = args.m if args.m is not None else 4
    from .whitney import assemble_complex

    cx = assemble_complex(_lattice(args, m))
    potential = _potential(args)
    A, M, S = assemble_dirac(cx)
    Ap = perturbed_operator(cx, A, M, S, mass=args.mass, potential=potential, shift=args.shift)
    if Ap.shape[0] < args.count:
        raise ConfigError(f"--count {args.count} exceeds the space dimension {Ap.shape[0]}")
    values = generalized_symmetric_eig(Ap, M, vectors=False).values
    oracle, shift = _oracle(args, potential)
    centre = shift if oracle is not None else 0.0
    sel = np.sort(np.argsort(np.abs(values - centre), kind="stable")[: args.count])
    res = generalized_symmetric_eig(Ap, M, vectors="select", select=sel)
    picked = res.values[sel]
    groups = []
    for value, mult in cluster(picked):
        members = np.abs(picked - value) <= 1e-6 * max(abs(value), 1e-3 * np.abs(picked).max(), 1e-12)
        groups.append({"value": value, "mult": int(mult),
                       "residual": float(res.scaled_residuals[members].max())})
    out = {"mesh": _mesh_block(args, [m]),
           "params": {"mass": args.mass, "potential": args.potential, "shift": args.shift, "count": args.count},
           "dimension": int(Ap.shape[0]), "eigenvalues": groups, "oracle": []}
    if oracle is not None:
        # oracle levels nearest the centre, enough to cover the requested count
        near, total = [], 0
        for v, c in sorted(oracle.levels, key=lambda lv: (abs(lv[0]), lv[0])):
            if total >= args.count:
                break
            near.append({"value": v + shift, "mult": c})
            total += c
        out["oracle"] = sorted(near, key=lambda lv: lv["value"])
    out["checks"] = {"residuals": bool(res.scaled_residuals.max() <= 1e-8)}
    return out


def _targets(args) -> list[float] | None:
    if args.targets is None or args.targets == "auto":
        return None
    ts = _float_list(args.targets)
    if not ts:
        raise ConfigError("--targets is empty; give oracle eigenvalues or 'auto'")
    return ts


def cmd_converge(args) -> dict:
    from .spectra import convergence_study

    ms = _m_list(args, [4, 8, 16])
    if len(ms) < 3:
        raise ConfigError("a convergence table needs at least three meshes in --m-list")
    targets = _targets(args)
    study = convergence_study([_lattice(args, m) for m in ms], targets, mass=args.mass, shift=args.shift)
    rows = []
    for f in study.fits:
        for m, h, e in zip(study.ms, f.hs, f.errors):
            rows.append({"target": f.target, "m": m, "h": h, "error": e})
    out = {"mesh": _mesh_block(args, ms),
           "params": {"mass": args.mass, "shift": args.shift, "targets": args.targets, "seed": args.seed},
           "rows": rows,
           "orders": [{"target": f.target, "slope": f.slope, "r2": f.r2} for f in study.fits],
           "spurious": study.spurious}
    out["checks"] = {"no_ambiguous_match": all(not mt.ambiguous for ms_ in study.matches for mt in ms_
                                               if any(abs(mt.target - (f.target + args.shift)) < 1e-9
                                                      for f in study.fits))}
    if args.csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target", "m", "h", "error", "slope", "r2", "seed"])
        slopes = {f.target: (f.slope, f.r2) for f in study.fits}
        for r in rows:
            w.writerow([repr(r["target"]), r["m"], repr(r["h"]), repr(r["error"]),
                        repr(slopes[r["target"]][0]), repr(slopes[r["target"]][1]), args.seed])
        with open(args.csv, "w") as fh:
            fh.write(buf.getvalue())
    return out


def cmd_hodge(args) -> dict:
    from .hodge import (decomposition_stability, decomposition_stability_exact, gap_measurement,
                        harmonic_dims, hodge_decompose)

    k = args.degree
    if not 0 <= k <= args.n:
        raise ConfigError(f"--degree must lie in 0..{args.n}")
    ms = _m_list(args, [4, 8, 16])
    cxs = _complexes(args, ms)
    rng = np.random.default_rng(args.seed)
    per_mesh = []
    worst_res, worst_orth = 0.0, 0.0
    for m, cx in zip(ms, cxs):
        dims = harmonic_dims(cx)
        res, orth = 0.0, 0.0
        for _ in range(args.samples):
            dec = hodge_decompose(cx, k, rng.standard_normal(cx.dim(k)))
            res = max(res, dec.residual)
            orth = max(orth, max(dec.orthogonality.values()))
        entry = {"m": m, "harmonic_dims": dims, "decomposition_residual": res, "orthogonality": orth}
        if k >= 1:
            entry["stability_sampled"] = decomposition_stability(cx, k, samples=args.samples, seed=args.seed)
            entry["stability_exact"] = decomposition_stability_exact(cx, k)
        per_mesh.append(entry)
        worst_res, worst_orth = max(worst_res, res), max(worst_orth, orth)
    out = {"mesh": _mesh_block(args, ms), "params": {"degree": k, "samples": args.samples, "seed": args.seed},
           "meshes": per_mesh}
    if k < args.n and len(cxs) >= 2:
        gap = gap_measurement(cxs, k, samples=args.samples, seed=args.seed)
        out["gap"] = {"ms": gap.ms, "hs": gap.hs, "max_ratio": gap.max_ratio, "slope": gap.slope}
    out["checks"] = {
        "harmonic_dims_binomial": all(e["harmonic_dims"] == [math.comb(args.n, j) for j in range(args.n + 1)]
                                      for e in per_mesh),
        "decomposition_identity": worst_res <= 1e-10,
        "orthogonality": worst_orth <= 1e-10,
    }
    return out


def cmd_norms(args) -> dict:
    from . import norms
    from .fractional import slobodetskij
    from .spectra import infsup_study

    params = {"suite": args.suite, "s": args.s, "s2": args.s2, "samples": args.samples, "seed": args.seed}
    if args.suite == "equivalence":
        ms = _m_list(args, [4, 8, 16])
        rec = norms.equivalence_suite(_complexes(args, ms), samples=args.samples, seed=args.seed)
        body = {"record": rec.to_dict(), "drift_exact_max": norms.drift(rec.exact_max),
                "drift_sampled_max": norms.drift(rec.sampled_max)}
    elif args.suite == "inverse":
        ms = _m_list(args, [4, 8, 16, 32])
        body = norms.inverse_inequality_suite(_complexes(args, ms), s=args.s, s2=args.s2, samples=args.samples,
                                              seed=args.seed).to_dict()
    elif args.suite == "regularity":
        ms = _m_list(args, [4, 8, 16, 32])
        body = {"record": norms.improved_regularity_record(_complexes(args, ms), s=args.s, samples=args.samples,
                                                           seed=args.seed).to_dict()}
    elif args.suite == "infsup":
        ms = _m_list(args, [4, 8, 16])
        rep = infsup_study(_complexes(args, ms), s=args.s)
        body = {"infsup": rep.to_dict()}
        body["checks"] = {"discrete_is_one": all(abs(c - 1) <= 1e-6 for c in rep.discrete),
                          "weak_positive": all(c > 0 for c in rep.weak)}
    else:  # slobodetskij values of the interpolated sine wave with error bars
        ms = _m_list(args, [4, 8])
        vals = []
        for m, cx in zip(ms, _complexes(args, ms)):
            u = cx.interpolate(0, lambda x: np.sin(2 * np.pi * x[:, :1]))
            v = slobodetskij(cx, 0, u, args.s)
            vals.append({"m": m, "value": v.value, "error_bar": v.error_bar})
        body = {"field": "interpolated sin(2 pi x_1), degree 0", "values": vals}
    out = {"mesh": _mesh_block(args, ms), "params": params}
    out.update(body)
    out.setdefault("checks", {})
    return out


def cmd_mollify(args) -> dict:
    from .mollify import Mollifier, delta_study, projector_suite, rate_experiment

    moll = Mollifier(args.n, args.q, args.eps)
    ms = _m_list(args, [4, 8, 16])
    cxs = _complexes(args, ms)
    params = {"suite": args.suite, "eps": args.eps, "q": args.q, "degree": args.degree, "seed": args.seed}
    if args.suite == "projector":
        rep = projector_suite(cxs, args.degree, moll, samples=args.samples, seed=args.seed)
        body = {"projector": rep.to_dict()}
        checks = {"reproduction": max(rep.reproduction) <= 1e-9, "idempotency": max(rep.idempotency) <= 1e-9,
                  "conditioning": max(rep.cond) < 1e6}
    else:
        rep = rate_experiment(cxs, moll, k=args.degree, fractional=args.fractional, s=args.s2)
        cx0 = cxs[0]
        u0 = cx0.interpolate(0, lambda x: np.sin(2 * np.pi * x[:, :1]))
        eps_values = (0.4, 0.3, 0.2, 0.1)
        deltas = delta_study(cx0, 0, u0, eps_values, q=args.q)
        body = {"rates": rep.to_dict(),
                "delta": {"m": ms[0], "s": 0.3, "eps": list(eps_values), "values": deltas}}
        checks = {"delta_monotone": bool(np.all(np.diff(deltas) < 0))}
    out = {"mesh": _mesh_block(args, ms), "params": params, "checks": checks}
    out.update(body)
    return out


def cmd_algebra(args) -> dict:
    from .diracmap import algebra_check

    if args.trials < 1:
        raise ConfigError("--trials must be positive")
    rep = algebra_check(seed=args.seed, trials=args.trials)
    return {"mesh": None, "params": {"seed": args.seed, "trials": args.trials}, "algebra": rep.to_dict(),
            "checks": {c.name: c.passed for c in rep.checks}}


# parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1, help="torus dimension (1, 2 or 3)")
    common.add_argument("--m", type=int, default=None, help="cells per period")
    common.add_argument("--m-list", default=None, help="comma separated mesh sequence, e.g. 4,8,16")
    common.add_argument("--lengths", default="1", help="torus periods, one value or one per axis")
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--threads", type=int, default=1, help="BLAS thread cap (1 gives reproducible output)")
    common.add_argument("--json", default=None, metavar="PATH", help="write the report here instead of stdout")

    p = argparse.ArgumentParser(prog="whitney-dirac", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    mesh = sub.add_parser("mesh", parents=[common], help="mesh summary and chain-complex checks")
    mesh.add_argument("action", choices=["info"])
    mesh.set_defaults(func=cmd_mesh)

    eig = sub.add_parser("eig", parents=[common], help="discrete Dirac eigenvalues nearest the spectral centre")
    eig.add_argument("--mass", type=float, default=0.0)
    eig.add_argument("--potential", default="zero", help="zero, const:c, cos:k1,..,kn or cosprod:k1,..,kn")
    eig.add_argument("--shift", type=float, default=0.0)
    eig.add_argument("--count", type=int, default=10)
    eig.set_defaults(func=cmd_eig)

    conv = sub.add_parser("converge", parents=[common], help="eigenvalue convergence table with fitted orders")
    conv.add_argument("--targets", default="auto", help="'auto' or comma separated oracle eigenvalues")
    conv.add_argument("--mass", type=float, default=0.0)
    conv.add_argument("--shift", type=float, default=0.0)
    conv.add_argument("--csv", default=None, metavar="PATH")
    conv.set_defaults(func=cmd_converge)

    hodge = sub.add_parser("hodge", parents=[common], help="harmonic forms, decompositions, stability and gap")
    hodge.add_argument("--degree", type=int, default=1)
    hodge.add_argument("--samples", type=int, default=20)
    hodge.set_defaults(func=cmd_hodge)

    nrm = sub.add_parser("norms", parents=[common], help="seminorm equivalence, inverse inequalities, inf-sup")
    nrm.add_argument("--suite", choices=["equivalence", "inverse", "slobodetskij", "regularity", "infsup"],
                     default="equivalence")
    nrm.add_argument("--s", type=float, default=0.3)
    nrm.add_argument("--s2", type=float, default=0.4)
    nrm.add_argument("--samples", type=int, default=100)
    nrm.set_defaults(func=cmd_norms)

    mol = sub.add_parser("mollify", parents=[common], help="smoothed projection suite and convergence rates")
    mol.add_argument("--suite", choices=["projector", "rates"], default="projector")
    mol.add_argument("--eps", type=float, default=0.25)
    mol.add_argument("--q", type=int, default=3)
    mol.add_argument("--degree", type=int, default=0)
    mol.add_argument("--samples", type=int, default=50)
    mol.add_argument("--fractional", action="store_true", help="also fit the Slobodetskij error order (n = 1)")
    mol.add_argument("--s2", type=float, default=0.4)
    mol.set_defaults(func=cmd_mollify)

    alg = sub.add_parser("algebra-check", parents=[common], help="quaternion and Dirac symbol identities")
    alg.add_argument("--trials", type=int, default=100)
    alg.set_defaults(func=cmd_algebra)
    return p


def run(argv: list[str] | None = None) -> tuple[int, str]:
    """Parse, dispatch and serialize; returns (exit code, JSON text)."""
    from .fractional import FractionalError
    from .hodge import HodgeError
    from .mesh import MeshError
    from .mollify import MollifyError
    from .spectra import EigenError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), ""
    header = {"schema": SCHEMA, "command": args.command}
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        with threadpool_limits(limits=args.threads):
            report = args.func(args)
    except (ConfigError, MeshError, FractionalError, MollifyError) as exc:
        return 2, dumps({**header, "error": {"kind": "config", "message": str(exc)}})
    except (EigenError, HodgeError) as exc:
        return 1, dumps({**header, "error": {"kind": "numerical", "message": str(exc)}})
    report = {**header, **report}
    failed = [name for name, ok in report.get("checks", {}).items() if not ok]
    report["passed"] = not failed
    return (1 if failed else 0), dumps(report)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    code, text = run(argv)
    if not text:
        return code
    path = None
    if "--json" in argv:
        i = argv.index("--json")
        path = argv[i + 1] if i + 1 < len(argv) else None
    else:
        path = next((a.split("=", 1)[1] for a in argv if a.startswith("--json=")), None)
    if path and code != 2:
        with open(path, "w") as fh:
            fh.write(text)
        summary = json.loads(text)
        print(f"{summary['command']}: {'pass' if summary.get('passed') else 'FAIL'} -> {path}")
    else:
        stream = sys.stderr if code == 2 else sys.stdout
        stream.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
