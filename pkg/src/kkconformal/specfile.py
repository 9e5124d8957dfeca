"""KKSpec documents (JSON).

Schema ``kkconformal.spec/1``.  A document is either a catalog reference::

    {"schema": "kkconformal.spec/1",
     "model": "hopf-instanton", "params": {"k": 4.0}}

with models and parameters

* ``hopf-instanton``: ``k`` (4.0), ``detune_internal_radius`` (1.0), ``chart_scale`` (1.0)
* ``trivial``: ``d`` (4), ``c`` (3 or 1), ``R_in_magnitude`` (6.0; 0 for c = 1)
* ``random``: ``seed`` (0), ``d`` (4), ``internal`` ("s3", "berger", "s2"), ``eps`` (0.05)

or a custom assembly::

    {"schema": "kkconformal.spec/1", "name": "my-data", "branch": null,
     "external": {"kind": "hyperbolic", "dim": 4, "scalar": 12.0, "chart": "stereographic"},
     "internal": {"kind": "s3", "radius": 1.0},
     "gauge": {"constant": [[...]], "linear": [[[...]]], "quadratic": [[[[...]]]]}}

``external`` is either a constant-curvature space (``kind`` flat/sphere/hyperbolic,
``dim``, ``scalar`` magnitude, optional ``chart``) or a polynomial metric
``{"polynomial": {"constant": (d,d), "linear": (d,d,d), "quadratic": (d,d,d,d)},
"half_width": 1.0}`` meaning ``g_ab = C_ab + L_abk x^k + Q_abkl x^k x^l``,
symmetrized in ``ab``.  ``internal`` picks the fibre together with its Killing
frame and structure constants:

* ``{"kind": "s3", "radius": r}``: left-invariant frame, ``c = (2/r) eps``;
* ``{"kind": "berger", "squash": [l1, l2, l3]}``: right-invariant frame, ``c = -2 eps``;
* ``{"kind": "s2"}``: rotation fields, ``c = -eps``;
* ``{"kind": "flat", "dim": c}``: translations, ``c = 0``.

``gauge`` gives ``A^a_mu = C^a_mu + L^a_{mu k} x^k + Q^a_{mu kl} x^k x^l``; every
table is optional and missing ones are zero.  Unknown keys are rejected at
every level.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from . import jet as J
from . import models as M
from .geom import Box, MetricField
from .jet import Jet3
from .kk import GaugeField, KKSpec

SPEC_SCHEMA = "kkconformal.spec/1"


class SpecFileError(ValueError):
    pass


_CATALOG_PARAMS = {
    "hopf-instanton": {"k": 4.0, "detune_internal_radius": 1.0, "chart_scale": 1.0},
    "trivial": {"d": 4, "c": 3, "R_in_magnitude": 6.0},
    "random": {"seed": 0, "d": 4, "internal": "s3", "eps": 0.05},
}


def _check_keys(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise SpecFileError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SpecFileError(f"{where}: unknown keys {extra}")
    return obj


def _table(value, shape: tuple, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != shape:
        raise SpecFileError(f"{where}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecFileError(f"{where}: non-finite entries")
    return arr


def catalog_spec(model: str, params: dict | None = None) -> KKSpec:
    if model not in _CATALOG_PARAMS:
        raise SpecFileError(f"unknown model {model!r}; known: {sorted(_CATALOG_PARAMS)}")
    p = dict(_CATALOG_PARAMS[model])
    _check_keys(params or {}, set(p), f"params of {model}")
    p.update(params or {})
    try:
        if model == "hopf-instanton":
            return M.hopf_instanton_spec(float(p["k"]), float(p["detune_internal_radius"]), float(p["chart_scale"]))
        if model == "trivial":
            c = int(p["c"])
            r_in = -float(p["R_in_magnitude"]) if c == 3 else 0.0  # sphere: negative under the default curvature sign
            return M.trivial_solution_spec(int(p["d"]), c, r_in)
        return M.random_spec(int(p["seed"]), int(p["d"]), str(p["internal"]), float(p["eps"]))
    except M.ModelError as exc:
        raise SpecFileError(str(exc)) from exc


def _external(obj: dict) -> MetricField:
    if "polynomial" in obj:
        _check_keys(obj, {"polynomial", "half_width"}, "external")
        poly = _check_keys(obj["polynomial"], {"constant", "linear", "quadratic"}, "external.polynomial")
        if "constant" not in poly:
            raise SpecFileError("external.polynomial needs a constant table")
        const = np.asarray(poly["constant"], dtype=float)
        if const.ndim != 2 or const.shape[0] != const.shape[1]:
            raise SpecFileError("external.polynomial.constant must be square")
        d = const.shape[0]
        lin = _table(poly.get("linear", np.zeros((d,) * 3)), (d,) * 3, "external.polynomial.linear")
        quad = _table(poly.get("quadratic", np.zeros((d,) * 4)), (d,) * 4, "external.polynomial.quadratic")
        base = 0.5 * (const + const.T)
        half = float(obj.get("half_width", 1.0))
        if half <= 0:
            raise SpecFileError("external.half_width must be positive")
        sig = tuple(int(s) for s in np.sign(np.linalg.eigvalsh(base)))
        return MetricField(d, M._polynomial_symmetric(base, lin, quad, 1.0), Box.cube(d, half), sig,
                           name="polynomial-external")
    _check_keys(obj, {"kind", "dim", "scalar", "chart"}, "external")
    try:
        return M.constant_curvature_space(int(obj["dim"]), float(obj.get("scalar", 0.0)), str(obj["kind"]),
                                          str(obj.get("chart", M.STEREOGRAPHIC)))
    except KeyError as exc:
        raise SpecFileError(f"external: missing {exc}") from exc
    except M.ModelError as exc:
        raise SpecFileError(f"external: {exc}") from exc


def _internal(obj: dict):
    kind = obj.get("kind") if isinstance(obj, dict) else None
    eps = M.levi_civita3()
    try:
        if kind == "s3":
            _check_keys(obj, {"kind", "radius"}, "internal")
            r = float(obj.get("radius", 1.0))
            return M.s3_metric(r), M.s3_killing_frame(r), M.s3_structure_constants(r)
        if kind == "berger":
            _check_keys(obj, {"kind", "squash"}, "internal")
            return M.berger_s3_metric(obj.get("squash", (1.0, 1.0, 1.0))), M.s3_killing_frame(1.0, "right"), -2.0 * eps
        if kind == "s2":
            _check_keys(obj, {"kind"}, "internal")
            return M.constant_curvature_space(2, 2.0, M.SPHERE), M.s2_rotation_frame(), -eps
        if kind == "flat":
            _check_keys(obj, {"kind", "dim"}, "internal")
            c = int(obj["dim"])
            return M.constant_curvature_space(c, 0.0, M.FLAT), M.flat_translations(c), np.zeros((c, c, c))
    except M.ModelError as exc:
        raise SpecFileError(f"internal: {exc}") from exc
    raise SpecFileError(f"internal: kind must be s3, berger, s2 or flat, got {kind!r}")


def _gauge(obj: dict | None, n: int, d: int) -> GaugeField:
    obj = _check_keys(obj or {}, {"constant", "linear", "quadratic"}, "gauge")
    a0 = _table(obj.get("constant", np.zeros((n, d))), (n, d), "gauge.constant")
    a1 = _table(obj.get("linear", np.zeros((n, d, d))), (n, d, d), "gauge.linear")
    a2 = _table(obj.get("quadratic", np.zeros((n, d, d, d))), (n, d, d, d), "gauge.quadratic")

    def evaluate(coords):
        x = J.stack(coords)
        quad = J.einsum("amn,n->am", J.einsum("amnl,l->amn", a2, x), x)
        return Jet3.constant(a0, coords[0].dim) + J.einsum("amn,n->am", a1, x) + quad

    return GaugeField(n, d, evaluate, name="polynomial-gauge")


def spec_from_dict(doc: dict) -> KKSpec:
    if not isinstance(doc, dict):
        raise SpecFileError("spec document must be a JSON object")
    if doc.get("schema", SPEC_SCHEMA) != SPEC_SCHEMA:
        raise SpecFileError(f"unsupported schema {doc.get('schema')!r}; expected {SPEC_SCHEMA}")
    if "model" in doc:
        _check_keys(doc, {"schema", "model", "params"}, "spec")
        return catalog_spec(str(doc["model"]), doc.get("params"))
    _check_keys(doc, {"schema", "name", "branch", "external", "internal", "gauge"}, "spec")
    for key in ("external", "internal"):
        if key not in doc:
            raise SpecFileError(f"spec: missing {key!r}")
    branch = doc.get("branch")
    if branch not in (None, "trivial", "instanton"):
        raise SpecFileError(f"spec: branch must be null, 'trivial' or 'instanton', got {branch!r}")
    external = _external(doc["external"])
    metric, frame, sc = _internal(doc["internal"])
    spec = KKSpec(external, metric, frame, _gauge(doc.get("gauge"), frame.n, external.dim), sc,
                  name=str(doc.get("name", "custom")), branch=branch)
    spec.check_shapes()
    return spec


def load_spec(path: str | Path) -> KKSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecFileError(f"{path}: invalid JSON: {exc}") from exc
    return spec_from_dict(doc)
