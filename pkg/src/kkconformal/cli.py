"""Command-line driver.

Exit codes: 0 every verdict tag / invariant passes; 1 a tag or invariant fails;
2 configuration error (bad flags, invalid parameters, malformed spec file);
3 domain or singularity failure during evaluation.

Reports are JSON.  Everything except the top-level ``metadata`` block is a
deterministic function of the command line.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from . import models as M
from . import reduce as R
from . import verify as V
from .geom import PAPER, STANDARD, GeometryError, convention_sign, curvature_bundle
from .jet import JetError
from .kk import KKError, assemble_metric, validate
from .specfile import SpecFileError, catalog_spec, load_spec

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3
CURVATURE_MODELS = ("flat", "sphere", "hyperbolic", "qk-space-form", "hopf-instanton", "trivial")
VERIFY_MODELS = ("hopf-instanton", "trivial", "random")
SUITES = ("flatness", "integrability", "reduction", "qk", "all")
VALIDATION_POINTS = 50


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------------------------
# argument parsing


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("must be a positive finite number")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kkconformal", description="Conformal flatness of Kaluza-Klein metrics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--points", type=_positive_int, default=20, help="sample points (default 20)")
        sp.add_argument("--seed", type=_seed, default=0, help="64-bit sampling seed (default 0)")
        sp.add_argument("--tol", type=_positive_float, default=V.DEFAULT_RTOL, help="relative tolerance")
        sp.add_argument("--atol", type=_positive_float, default=V.DEFAULT_ATOL, help="absolute tolerance")
        sp.add_argument("--convention", choices=(PAPER, STANDARD, "both"), default="both")
        sp.add_argument("--out", help="write the report here instead of stdout")

    c = sub.add_parser("curvature", help="curvature summaries of a catalog metric")
    c.add_argument("--model", choices=CURVATURE_MODELS, required=True)
    c.add_argument("--dim", type=_positive_int, help="dimension (flat/sphere/hyperbolic) or d (trivial)")
    c.add_argument("--scalar", type=float, help="scalar-curvature magnitude (|R_in| for trivial)")
    c.add_argument("--chart", choices=(M.STEREOGRAPHIC, M.HYPERSPHERICAL), default=M.STEREOGRAPHIC)
    c.add_argument("--k", type=_positive_float, default=4.0, help="quaternionic sectional curvature")
    common(c)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=SUITES)
    src = v.add_mutually_exclusive_group()
    src.add_argument("--model", choices=VERIFY_MODELS)
    src.add_argument("--spec", help="KKSpec JSON file, or 'random' for the seeded random spec")
    v.add_argument("--dim", type=_positive_int, help="external dimension d (trivial/random)")
    v.add_argument("--scalar", type=_positive_float, help="|R_in| (trivial)")
    v.add_argument("--k", type=_positive_float, default=4.0, help="quaternionic sectional curvature")
    v.add_argument("--internal", choices=M.RANDOM_INTERNALS, default="s3", help="fibre of the random spec")
    v.add_argument("--detune-internal-radius", type=_positive_float, default=1.0)
    common(v)
    return p


# ------------------------------------------------------------------------------------
# JSON


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    return x


def dumps(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def report_body(doc: dict) -> dict:
    """The deterministic part of a report."""
    return {k: v for k, v in doc.items() if k != "metadata"}


def _conventions(flag: str) -> list[str]:
    return [PAPER, STANDARD] if flag == "both" else [flag]


# ------------------------------------------------------------------------------------
# curvature


def _curvature_target(args):
    """(metric, expected scalar under the ``paper`` flag, Weyl/Cotton tolerance, description)."""
    m = args.model
    if m in ("flat", "sphere", "hyperbolic"):
        dim = args.dim or 4
        if m == "flat":
            mag = 0.0 if args.scalar is None else args.scalar
        else:
            mag = float(dim * (dim - 1)) if args.scalar is None else args.scalar
        metric = M.constant_curvature_space(dim, mag, m, args.chart)
        base_scalar = {"flat": 0.0, "sphere": -mag, "hyperbolic": mag}[m]
        return metric, base_scalar, (1e-10, 1e-9), {"kind": m, "dim": dim, "scalar_magnitude": mag,
                                                      "chart": args.chart}
    if m == "qk-space-form":
        qk = M.quaternionic_space_form(args.k)
        return qk.g, -4 * 12 * args.k / 4, (1e-10, 1e-9), {"k": args.k, "dim": 4}
    if m == "hopf-instanton":
        spec = M.hopf_instanton_spec(args.k)
        return assemble_metric(spec), -10.5 * args.k, (1e-7, 1e-7), {"k": args.k, "dim": spec.D}
    d = args.dim or 4
    mag = 6.0 if args.scalar is None else args.scalar
    if mag <= 0:
        raise M.ModelError("trivial needs a positive |R_in|")
    spec = M.trivial_solution_spec(d, 3, -mag)
    base_scalar = mag * (d * (d - 1) / 6.0 - 1.0)
    return assemble_metric(spec), base_scalar, (1e-8, 1e-8), {"d": d, "c": 3, "R_in_magnitude": mag,
                                                                "dim": spec.D}


def run_curvature(args) -> dict:
    metric, base_scalar, (weyl_tol, cotton_tol), params = _curvature_target(args)
    pts = V.sample_box(metric.domain, args.points, args.seed)
    runs = {}
    ok = True
    for conv in _conventions(args.convention):
        bundles = V._pmap(lambda p: curvature_bundle(metric, p, conv), pts)
        rows = []
        for p, b in zip(pts, bundles):
            ginv = np.linalg.inv(metric.values(p))
            eig = np.linalg.eigvals(ginv @ b.ricci).real
            rows.append({"point": p, "scalar": b.scalar,
                         "ricci_eigenvalues": {"min": float(eig.min()), "max": float(eig.max())},
                         "max_weyl": None if b.weyl is None else float(np.abs(b.weyl).max()),
                         "max_cotton": None if b.cotton is None else float(np.abs(b.cotton).max())})
        inv = []
        expected = convention_sign(conv) * base_scalar
        dev = max(abs(r["scalar"] - expected) for r in rows)
        stol = 1e-9 * max(1.0, abs(expected))
        inv.append({"name": "scalar", "expected": expected, "max_deviation": dev, "tolerance": stol,
                    "passed": dev <= stol})
        if rows[0]["max_weyl"] is not None:
            w = max(r["max_weyl"] for r in rows)
            inv.append({"name": "max_weyl", "value": w, "tolerance": weyl_tol, "passed": w <= weyl_tol})
            cval = max(r["max_cotton"] for r in rows)
            inv.append({"name": "max_cotton", "value": cval, "tolerance": cotton_tol, "passed": cval <= cotton_tol})
        passed = all(i["passed"] for i in inv)
        ok &= passed
        runs[conv] = {"points": rows, "invariants": inv, "verdict": "pass" if passed else "fail"}
    return {"schema": V.SCHEMA_VERSION, "command": "curvature",
            "config": {"model": args.model, "params": params, "points": args.points, "seed": args.seed,
                       "convention": args.convention},
            "runs": runs, "verdict": "pass" if ok else "fail"}


# ------------------------------------------------------------------------------------
# verify


def _resolve_spec(args):
    if args.spec == "random":
        return M.random_spec(args.seed, args.dim or 4, args.internal), "random"
    if args.spec:
        return load_spec(args.spec), "file"
    model = args.model or "hopf-instanton"
    if model == "hopf-instanton":
        return M.hopf_instanton_spec(args.k, args.detune_internal_radius), model
    if args.detune_internal_radius != 1.0:
        raise ConfigError("--detune-internal-radius applies to hopf-instanton only")
    if model == "trivial":
        return catalog_spec("trivial", {"d": args.dim or 4, "R_in_magnitude": args.scalar or 6.0}), model
    return M.random_spec(args.seed, args.dim or 4, args.internal), model


def _flatness_tags(spec) -> tuple:
    tags = V.SYSTEM8_TAGS + V.CURVATURE_TAGS + ("WEYL-D", "W-8g'")
    if spec.branch is not None:
        tags += V.GBAR_TAGS
    return tags


def run_verify(args) -> dict:
    spec, source = _resolve_spec(args)
    ys = [p.y for p in V.sample_kk_points(spec, VALIDATION_POINTS, args.seed)]
    vrep = validate(spec, ys)
    suites = SUITES[:-1] if args.suite == "all" else (args.suite,)
    if args.suite == "qk" and not spec.name.startswith("hopf-instanton"):
        raise ConfigError("the qk suite needs the hopf-instanton model")
    if "reduction" in suites and spec.D < 4 and args.suite == "reduction":
        raise ConfigError("the reduction suite needs D >= 4")
    out_suites = {}
    ok = True
    for suite in suites:
        runs = {}
        if suite == "qk":
            if not spec.name.startswith("hopf-instanton"):
                continue
            qk = M.quaternionic_space_form(args.k)
            rep = V.verify_qk(qk, args.points, args.seed, args.tol, args.atol)
            runs["convention-free"] = rep.to_dict()
            ok &= rep.passed
        else:
            for conv in _conventions(args.convention):
                if suite == "flatness":
                    rep = V.verify_spec(spec, _flatness_tags(spec), args.points, args.seed, conv, args.tol,
                                        args.atol, suite)
                elif suite == "integrability":
                    rep = V.verify_spec(spec, V.INTEGRABILITY_TAGS + ("C-9a'",), args.points, args.seed, conv,
                                        args.tol, args.atol, suite)
                else:
                    rep = R.compare(spec, args.points, args.seed, conv, args.tol, args.atol)
                runs[conv] = rep.to_dict()
                ok &= rep.passed
        entry = {"runs": runs}
        if len(runs) == 2:
            entry["convention_comparison"] = _comparison(runs)
        out_suites[suite] = entry
    return {"schema": V.SCHEMA_VERSION, "command": "verify",
            "config": {"suite": args.suite, "source": source, "spec": spec.name, "branch": spec.branch,
                       "d": spec.d, "c": spec.c, "points": args.points, "seed": args.seed,
                       "rtol": args.tol, "atol": args.atol, "convention": args.convention},
            "validation": {"points": VALIDATION_POINTS, "killing": vrep.killing, "commutator": vrep.commutator,
                           "antisymmetry": vrep.antisymmetry, "jacobi": vrep.jacobi},
            "suites": out_suites, "verdict": "pass" if ok else "fail"}


def _comparison(runs: dict) -> dict:
    """Per tag: do the printed signs hold literally under each flag?"""
    out = {}
    for tag in runs[PAPER]["equations"]:
        name = tag["tag"]
        if not tag.get("applicable") or "literal" not in tag:
            continue
        other = next(t for t in runs[STANDARD]["equations"] if t["tag"] == name)
        out[name] = {PAPER: tag["literal"]["passed"], STANDARD: other["literal"]["passed"]}
    lits = {c: [v[c] for v in out.values()] for c in (PAPER, STANDARD)}
    out["summary"] = {c: f"{sum(v)}/{len(v)} literal" for c, v in lits.items()}
    return out


# ------------------------------------------------------------------------------------


def main(argv: Sequence[str] | None = None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"kkconformal: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        doc = run_curvature(args) if args.command == "curvature" else run_verify(args)
    except (ConfigError, SpecFileError, M.ModelError, KKError) as exc:
        print(f"kkconformal: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, JetError, R.ReductionError, V.VerifyError, np.linalg.LinAlgError) as exc:
        print(f"kkconformal: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    doc["metadata"] = {
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "elapsed_seconds": round(time.perf_counter() - t0, 3),
        "version": __version__,
        "threads": os.environ.get(V.THREADS_ENV, "default"),
    }
    text = dumps(doc)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if doc["verdict"] == "pass" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
