"""
Command-line interface.

Every command prints one report. JSON reports share the envelope
``{command, config, results, max_residual, verdict}`` and are byte-identical
for identical flags (all randomness comes from ``--seed``).

Exit codes: 0 success, 1 input or domain error, 2 residual above tolerance;
``cl-trivial`` uses 0/3/4 for smooth/divergence/inconclusive evidence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from . import checks
from . import forms as fm
from . import jets
from . import triviality as tr
from .errors import LosikError
from .expr import VectorFieldSpec
from .prolong import flow, prolong

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BREACH = 2
EXIT_DIVERGENCE = 3
EXIT_INCONCLUSIVE = 4

CHECK_DEFAULT_BUNDLES = {
    "cocycle": ("S2", "O", "SL", "A", "B"),
    "canonicity": ("S2", "O", "SL", "A", "GL", "B"),
    "lie": ("S2", "O", "SL", "A", "GL", "B"),
    "flow-consistency": ("S2", "O", "SL", "A", "B"),
}


class InputError(ValueError):
    """Bad command-line input."""


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise InputError(f"cannot read numbers from {text!r}") from exc


def _clean(x):
    """JSON-safe plain Python values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _config(args, keys: Sequence[str]) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _envelope(command: str, config: dict, results, max_residual, verdict: str) -> dict:
    return {
        "command": command,
        "config": _clean(config),
        "results": _clean(results),
        "max_residual": _clean(max_residual),
        "verdict": verdict,
    }


def _emit(report: dict, fmt: str, out, csv_text: str | None = None, text: str | None = None) -> None:
    if fmt == "csv" and csv_text is not None:
        out.write(csv_text)
    elif fmt == "text":
        out.write((text if text is not None else _as_text(report)) + "\n")
    else:
        out.write(json.dumps(report, sort_keys=True, indent=2) + "\n")


def _as_text(report: dict) -> str:
    lines = [f"{report['command']}: {report['verdict']}"]
    if report.get("max_residual") is not None:
        lines.append(f"max residual: {report['max_residual']:.3e}")
    results = report["results"]
    if isinstance(results, dict):
        for k in sorted(results):
            lines.append(f"{k}: {results[k]}")
    else:
        for r in results:
            lines.append(str(r))
    return "\n".join(lines)


def _point(bundle: str, n: int, text: str):
    coords = _floats(text)
    dim = jets.chart_dim(bundle, n)
    if len(coords) != dim:
        names = ", ".join(jets.coordinate_names(bundle, n))
        raise InputError(f"{bundle} over n={n} needs {dim} coordinates ({names}), got {len(coords)}")
    return jets.point_from_flat(bundle, np.array(coords), n)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# -- commands -------------------------------------------------------------


def cmd_check(args, out) -> int:
    bundles = [args.bundle] if args.bundle else list(CHECK_DEFAULT_BUNDLES[args.kind])
    rng = _rng(args.seed)
    tol = args.tol
    results = []
    for b in bundles:
        if args.kind == "cocycle":
            res = checks.cocycle_sweep(b, args.n, args.samples, rng)
        elif args.kind == "canonicity":
            res = checks.canonicity_sweep(b, args.n, args.samples, rng)
        elif args.kind == "lie":
            res = checks.lie_sweep(b, args.n, args.samples, rng)
        else:
            res = checks.flow_consistency_sweep(b, args.n, args.samples, rng, T=args.T, step=args.step)
        results.append({"bundle": b, "trials": res, "max": max(res, default=0.0)})
    worst = max((r["max"] for r in results), default=0.0)
    verdict = "pass" if worst <= tol else "fail"
    cfg = _config(args, ("kind", "n", "seed", "samples", "tol", "step", "T", "bundle"))
    report = _envelope(f"check {args.kind}", cfg, results, worst, verdict)
    text = "\n".join(
        [f"check {args.kind}: {verdict} (max residual {worst:.3e}, tol {tol:g})"]
        + [f"  {r['bundle']}: max {r['max']:.3e} over {len(r['trials'])} trials" for r in results]
    )
    _emit(report, args.format, out, text=text)
    return EXIT_OK if verdict == "pass" else EXIT_BREACH


def cmd_prolong(args, out) -> int:
    V = VectorFieldSpec.parse(args.field, args.n)
    p = _point(args.bundle, args.n, args.point)
    comps = np.asarray(prolong(args.bundle, V).components(p), dtype=float)
    names = jets.coordinate_names(args.bundle, args.n)
    results = {"point": p.flat(), "components": {name: c for name, c in zip(names, comps)}}
    cfg = _config(args, ("bundle", "n", "field", "point"))
    report = _envelope("prolong", cfg, results, None, "ok")
    text = "\n".join(f"V~[{name}] = {float(c)!r}" for name, c in zip(names, comps))
    _emit(report, args.format, out, text=text)
    return EXIT_OK


def cmd_flow(args, out) -> int:
    V = VectorFieldSpec.parse(args.field, args.n)
    p = _point(args.bundle, args.n, args.point)
    res = flow(prolong(args.bundle, V), p, args.T, args.step)
    names = jets.coordinate_names(args.bundle, args.n)
    results = {
        "final": {name: c for name, c in zip(names, res.final)},
        "steps": len(res.times) - 1,
        "step": res.step,
    }
    cfg = _config(args, ("bundle", "n", "field", "point", "T", "step"))
    report = _envelope("flow", cfg, results, None, "ok")
    _emit(report, args.format, out, csv_text=res.to_csv())
    return EXIT_OK


def cmd_gvl_eval(args, out) -> int:
    form = fm.gvl_form(args.variant, args.n)
    p = _point(args.variant, args.n, args.point)
    names = form.chart.names
    if args.directions:
        idx = [int(i) for i in _floats(args.directions)]
        if len(idx) != form.degree or any(not 0 <= i < form.chart.dim for i in idx):
            raise InputError(f"need {form.degree} direction indices in [0, {form.chart.dim})")
        value = form.coefficient(p, idx)
        results = {"directions": [names[i] for i in idx], "value": value}
        text = f"gvl_{args.variant}({', '.join(names[i] for i in idx)}) = {value!r}"
    else:
        coeffs = form.coefficients(p)
        results = {"coefficients": [[[names[i] for i in I], c] for I, c in coeffs.items()]}
        text = "\n".join(f"{' ^ '.join('d' + names[i] for i in I)}: {c!r}" for I, c in coeffs.items())
    cfg = _config(args, ("variant", "n", "point", "directions"))
    _emit(_envelope("gvl-eval", cfg, results, None, "ok"), args.format, out, text=text)
    return EXIT_OK


def cmd_cltrivial(args, out) -> int:
    cfg = _config(args, ("profile", "r0", "rmin", "R", "rotational", "samples", "seed", "tol"))
    if args.rotational:
        residual = tr.example2_check(args.profile, samples=args.samples, seed=args.seed)
        verdict = "trivial" if residual <= args.tol else "fail"
        results = {"field": "rotational", "solution": "y_2 y^1 - y_1 y^2", "R": 0.0, "residual": residual}
        report = _envelope("cl-trivial", cfg, results, residual, verdict)
        _emit(report, args.format, out, text=f"rotational field: {verdict}, max |V~G| = {residual:.3e}")
        return EXIT_OK if verdict == "trivial" else EXIT_BREACH
    if not 0 < args.rmin < args.r0 < 1:
        raise InputError("need 0 < rmin < r0 < 1")
    rep = tr.blowup_probe(args.profile, r0=args.r0, r_min=args.rmin, R=args.R)
    report = _envelope("cl-trivial", cfg, rep.to_dict(), rep.residual, rep.verdict)
    text = (
        f"profile {rep.profile}: {rep.verdict} (R = {rep.R:g}, slope {rep.slope:.6g}, "
        f"fit residual {rep.residual:.3e}, total variation {rep.total_variation:.3e})"
    )
    _emit(report, args.format, out, csv_text=rep.to_csv(), text=text)
    return {"smooth-evidence": EXIT_OK, "divergence-evidence": EXIT_DIVERGENCE}.get(rep.verdict, EXIT_INCONCLUSIVE)


def cmd_rot_average(args, out) -> int:
    G = tr.ScalarFn(args.expr)
    coords = _floats(args.point)
    if len(coords) != 4:
        raise InputError("B(D^2) points have 4 coordinates: y^1, y^2, y_1, y_2")
    Q = tr.rot_average(G, nodes=args.nodes)
    value = float(Q(np.array(coords)))
    results = {"G": G.source, "point": coords, "Q": value, "G_at_point": float(G(coords))}
    cfg = _config(args, ("expr", "point", "nodes"))
    _emit(_envelope("rot-average", cfg, results, None, "ok"), args.format, out, text=f"Q = {value!r}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--n", type=int, default=2, help="base dimension (default 2)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--samples", type=int, default=20, help="random trials or points (default 20)")
    p.add_argument("--tol", type=float, default=1e-9, help="residual tolerance (default 1e-9)")
    p.add_argument("--step", type=float, default=1e-3, help="integrator step (default 1e-3)")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json", help="report format")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="losik", description="Numerical checks for characteristic classes of bundle models."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="randomized invariance sweeps")
    c.add_argument("kind", choices=tuple(CHECK_DEFAULT_BUNDLES))
    c.add_argument("--bundle", choices=jets.BUNDLES[1:], help="restrict to one bundle")
    c.add_argument("--T", type=float, default=0.1, help="flow time for flow-consistency")
    c.set_defaults(func=cmd_check)

    p = sub.add_parser("prolong", parents=[common], help="prolonged field components at a point")
    p.add_argument("--bundle", choices=jets.BUNDLES, required=True)
    p.add_argument("--field", required=True, help='comma-separated components, e.g. "y2, -y1"')
    p.add_argument("--point", required=True, help="flat chart coordinates, comma-separated")
    p.set_defaults(func=cmd_prolong)

    f = sub.add_parser("flow", parents=[common], help="integrate a prolonged field")
    f.add_argument("--bundle", choices=jets.BUNDLES, required=True)
    f.add_argument("--field", required=True)
    f.add_argument("--point", required=True)
    f.add_argument("--T", type=float, default=1.0, help="final time (default 1)")
    f.set_defaults(func=cmd_flow)

    g = sub.add_parser("gvl-eval", parents=[common], help="evaluate the Godbillon-Vey-Losik form")
    g.add_argument("--variant", choices=("S2", "O", "SL", "A"), required=True)
    g.add_argument("--point", required=True)
    g.add_argument("--directions", help="0-based coordinate indices to evaluate on, comma-separated")
    g.set_defaults(func=cmd_gvl_eval)

    t = sub.add_parser("cl-trivial", parents=[common], help="G0 blow-up probe for a radial profile")
    t.add_argument("--profile", required=True, help='profile in r2 or r, e.g. "1 + r2"')
    t.add_argument("--r0", type=float, default=0.5)
    t.add_argument("--rmin", type=float, default=1e-6)
    t.add_argument("--R", type=float, default=None, help="override the forced constant 2 f(0)")
    t.add_argument("--rotational", action="store_true", help="check the rotational example instead")
    t.set_defaults(func=cmd_cltrivial, n=2)

    r = sub.add_parser("rot-average", parents=[common], help="rotational average of a function on B(D^2)")
    r.add_argument("--expr", required=True, help="expression in y1, y2 (base) and y3, y4 (fiber)")
    r.add_argument("--point", required=True)
    r.add_argument("--nodes", type=int, default=256)
    r.set_defaults(func=cmd_rot_average)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which is the breach code here
        return EXIT_INPUT if exc.code == 2 else int(exc.code or 0)
    if args.command == "cl-trivial" and args.rotational and not any(a.split("=")[0] == "--tol" for a in argv):
        args.tol = 1e-10
    try:
        if getattr(args, "n", 1) < 1:
            raise InputError("--n must be positive")
        if getattr(args, "samples", 1) < 1:
            raise InputError("--samples must be positive")
        if getattr(args, "step", 1.0) <= 0:
            raise InputError("--step must be positive")
        return args.func(args, out)
    except (LosikError, InputError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
