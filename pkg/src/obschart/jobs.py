"""Job configuration: strict YAML schema, validation and defaults.

A job is one model at one reference point, with either a fixed chart or a
builder specification, plus a list of arcs to check.  Unknown keys are
rejected; every error names the offending key path (and line when known).

Example::

    schema_version: 1
    model: {name: gmm, sigma: 1.0}
    theta0: [0.0, 0.0, 0.0]
    chart: [m1, k2, k3]
    arcs:
      - {id: mu, coefficients: [{mu: 1}]}
    grid: {t0: 0.1, ratio: 0.5, count: 10, floor: 1.0e-10}
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .arcs import Arc, GridSpec
from .builder import BUILDER_FLOOR, ObservablePool
from .chart import Chart, Observable
from .errors import ConfigError, DomainError
from .model import ModelSpec
from .numerics import Budget
from .testfunctions import bump
from .zoo import HYPERPARAMETERS, MODELS, build_model

SCHEMA_VERSION = 1

TOP_KEYS = {"schema_version", "model", "theta0", "chart", "builder", "arcs", "grid", "budget", "seed", "outputs"}
GRID_KEYS = {"t0": float, "ratio": float, "count": int, "floor": float, "min_points": int, "retries": int}
BUDGET_KEYS = {
    "quad_nodes": int,
    "mc_samples": int,
    "mc_tol": float,
    "fd_step": float,
    "mc_fd_step": float,
    "jacobian_rel_tol": float,
    "fisher_rel_tol": float,
    "angle_tol": float,
    "discrepancy_tol": float,
    "method": str,
    "allow_closed_form": bool,
    "trapezoid_max_doublings": int,
}
BUILDER_KEYS = {"pool", "seed_chart", "target_order", "max_iters", "grid"}
POOL_KEYS = {"cumulants", "monomials", "cross_moments", "bumps"}
OUTPUT_KEYS = {"report", "traces", "timings"}
ARC_KEYS = {"id", "coefficients"}
HYPER_TYPES = {
    "sigma": float,
    "sigma_n": float,
    "w0": float,
    "b0": float,
    "width": float,
    "p": int,
    "q": int,
    "r": int,
}


@dataclass(frozen=True)
class BuilderSpec:
    pool: ObservablePool
    seed_chart: Chart
    target_order: int = 4
    max_iters: int = 20
    grid: GridSpec = GridSpec(floor=BUILDER_FLOOR)


@dataclass(frozen=True)
class AnalysisJob:
    model: ModelSpec
    theta0: np.ndarray
    chart: Optional[Chart]
    builder: Optional[BuilderSpec]
    arcs: tuple
    grid: GridSpec
    budget: Budget
    seed: int
    report_path: Optional[str] = None
    traces_dir: Optional[str] = None
    timings: bool = False


# -- observable and arc specs ------------------------------------------------

_RESPONSE = re.compile(r"psi(?:(\d)(\d))?\[(.+)\]")


def parse_observable(text, model: ModelSpec, path: str) -> Observable:
    """``m1`` (mean), ``k<n>`` (cumulant), ``m<i><j>`` (cross moment),
    ``x^<k>`` (monomial), ``psi[<test function>]`` or ``psi<i><j>[...]`` (response)."""
    if not isinstance(text, str):
        raise ConfigError(f"observable spec must be a string, got {text!r}", path)
    s = text.strip()
    try:
        if s == "m1" or re.fullmatch(r"k\d+", s):
            return Observable.cumulant(1 if s == "m1" else int(s[1:]))
        if m := re.fullmatch(r"m(\d)(\d)", s):
            return Observable.cross_moment(int(m[1]), int(m[2]))
        if m := re.fullmatch(r"x\^(\d+)", s):
            return Observable.monomial([int(m[1])], id="x" if m[1] == "1" else None)
        if m := _RESPONSE.fullmatch(s):
            i, j = (int(m[1]), int(m[2])) if m[1] else (1, 1)
            return Observable.response(m[3], i, j)
    except ValueError as exc:
        raise ConfigError(f"invalid observable '{s}': {exc}", path) from None
    raise ConfigError(f"unrecognized observable spec '{s}'", path)


def _default_chart(model, path):
    if not hasattr(model, "default_chart"):
        raise ConfigError(f"model '{model.name}' has no default chart", path)
    return model.default_chart()


def parse_chart(spec, model: ModelSpec, path: str = "chart") -> Chart:
    if spec == "default":
        return _default_chart(model, path)
    if not isinstance(spec, list):
        raise ConfigError("chart must be 'default' or a list of observable specs", path)
    obs = [parse_observable(s, model, f"{path}[{i}]") for i, s in enumerate(spec)]
    try:
        return Chart(tuple(obs))
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def parse_pool(spec, model: ModelSpec, path: str = "builder.pool") -> ObservablePool:
    if spec == "default":
        return ObservablePool(model.default_pool())
    if isinstance(spec, list):
        obs = [parse_observable(s, model, f"{path}[{i}]") for i, s in enumerate(spec)]
    elif isinstance(spec, dict):
        _check_keys(spec, POOL_KEYS, path)
        obs = []
        if "cumulants" in spec:
            n = _typed(spec["cumulants"], int, f"{path}.cumulants")
            obs += [Observable.cumulant(k) for k in range(1, n + 1)]
        if "monomials" in spec:
            n = _typed(spec["monomials"], int, f"{path}.monomials")
            obs += [Observable.monomial([k], id="x" if k == 1 else None) for k in range(1, n + 1)]
        if _typed(spec.get("cross_moments", False), bool, f"{path}.cross_moments"):
            p = getattr(model, "p", 1)
            q = getattr(model, "q", 1)
            obs += [Observable.cross_moment(i, j) for i in range(1, p + 1) for j in range(1, q + 1)]
        if "bumps" in spec:
            obs += _bump_pool(spec["bumps"], model, f"{path}.bumps")
    else:
        raise ConfigError("pool must be 'default', a list of observables, or a mapping", path)
    if not obs:
        raise ConfigError("pool is empty", path)
    try:
        return ObservablePool(obs)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def _bump_pool(spec, model, path):
    if not isinstance(spec, dict):
        raise ConfigError("bumps must be a mapping with 'centers' and optional 'width'", path)
    _check_keys(spec, {"centers", "width"}, path)
    if "centers" not in spec:
        raise ConfigError("missing key 'centers'", path)
    centers = _float_list(spec["centers"], f"{path}.centers")
    width = _typed(spec.get("width", 1.0), float, f"{path}.width")
    if width <= 0:
        raise ConfigError("width must be positive", f"{path}.width")
    p = getattr(model, "p", 1)
    q = getattr(model, "q", 1)
    return [
        Observable.response(bump(c, width), i, j)
        for c in centers
        for i in range(1, p + 1)
        for j in range(1, q + 1)
    ]


def parse_vector(spec, model: ModelSpec, path: str, complete: bool = False) -> np.ndarray:
    """A parameter vector as a list, or a ``name -> value`` map.

    Missing names are 0 unless ``complete`` is set, in which case they are errors.
    """
    d = model.param_dim
    if isinstance(spec, dict):
        missing = [n for n in model.param_names if n not in spec]
        if complete and missing:
            raise ConfigError(f"missing parameter(s) {missing}", path)
        vec = np.zeros(d)
        for name, val in spec.items():
            if name not in model.param_names:
                raise ConfigError(f"unknown parameter '{name}' (expected {list(model.param_names)})", f"{path}.{name}")
            vec[model.param_names.index(name)] = _typed(val, float, f"{path}.{name}")
        return vec
    vec = np.array(_float_list(spec, path))
    if vec.size != d:
        raise ConfigError(f"expected {d} entries for {list(model.param_names)}, got {vec.size}", path)
    return vec


def parse_arc(spec, model: ModelSpec, theta0, path: str) -> Arc:
    if not isinstance(spec, dict):
        raise ConfigError("arc must be a mapping with 'id' and 'coefficients'", path)
    _check_keys(spec, ARC_KEYS, path)
    for k in sorted(ARC_KEYS):
        if k not in spec:
            raise ConfigError(f"missing key '{k}'", path)
    arc_id = spec["id"]
    if not isinstance(arc_id, str) or not arc_id:
        raise ConfigError("arc id must be a non-empty string", f"{path}.id")
    coefs = spec["coefficients"]
    if not isinstance(coefs, list) or not coefs:
        raise ConfigError("coefficients must be a non-empty list of vectors", f"{path}.coefficients")
    rows = [parse_vector(c, model, f"{path}.coefficients[{k}]") for k, c in enumerate(coefs)]
    try:
        return Arc(theta0, np.array(rows), arc_id)
    except ValueError as exc:
        raise ConfigError(str(exc), f"{path}.coefficients") from None


# -- primitive validation ------------------------------------------------------


def _check_keys(d: dict, allowed, path):
    for k in d:
        if k not in allowed:
            where = f"{path}.{k}" if path else str(k)
            raise ConfigError(f"unknown key '{k}' (allowed: {sorted(allowed)})", where)


def _typed(value, kind, path):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        if not np.isfinite(value):
            raise ConfigError(f"expected a finite number, got {value!r}", path)
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    raise TypeError(kind)


def _float_list(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"expected a non-empty list of numbers, got {value!r}", path)
    return [_typed(v, float, f"{path}[{i}]") for i, v in enumerate(value)]


def _mapping(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"expected a mapping, got {value!r}", path)
    return value


def _line_index(text: str) -> dict:
    """Key path -> 1-based line number, from the YAML node tree."""
    index = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = f"{path}.{k.value}" if path else str(k.value)
                index[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = f"{path}[{i}]"
                index[p] = v.start_mark.line + 1
                walk(v, p)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index
    if root is not None:
        walk(root, "")
    return index


def _parse_section(d, types, path, factory):
    d = _mapping(d, path)
    _check_keys(d, set(types), path)
    kw = {k: _typed(v, types[k], f"{path}.{k}") for k, v in d.items()}
    try:
        return factory(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def _parse_model(spec) -> ModelSpec:
    spec = _mapping(spec, "model")
    if "name" not in spec:
        raise ConfigError("missing key 'name'", "model")
    name = spec["name"]
    if not isinstance(name, str) or name not in MODELS:
        raise ConfigError(f"unknown model {name!r} (expected one of {sorted(MODELS)})", "model.name")
    hyper = {}
    for k, v in spec.items():
        if k == "name":
            continue
        if k not in HYPERPARAMETERS[name]:
            raise ConfigError(
                f"unknown hyperparameter '{k}' for model '{name}' (allowed: {list(HYPERPARAMETERS[name])})",
                f"model.{k}",
            )
        if k == "centers":
            hyper[k] = tuple(_float_list(v, "model.centers"))
        elif k == "sigma_x":
            rows = v if isinstance(v, list) else None
            if not rows or not all(isinstance(r, list) for r in rows):
                raise ConfigError("sigma_x must be a square matrix (list of rows)", "model.sigma_x")
            hyper[k] = np.array([_float_list(r, f"model.sigma_x[{i}]") for i, r in enumerate(rows)])
        else:
            hyper[k] = _typed(v, HYPER_TYPES[k], f"model.{k}")
    try:
        return build_model(name, **hyper)
    except ConfigError:
        raise
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"cannot construct model '{name}': {exc}", "model") from None


def parse_config(text: str) -> AnalysisJob:
    """Validate a YAML job document; raises :class:`ConfigError` with key path and line."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML parse error: {exc}", None, mark.line + 1 if mark else None) from None
    lines = _line_index(text)
    try:
        return _build_job(doc)
    except ConfigError as exc:
        if exc.line is None and exc.path:
            line = _lookup_line(lines, exc.path)
            if line is not None:
                raise ConfigError(exc.message, exc.path, line) from None
        raise


def _lookup_line(lines, path):
    while path:
        if path in lines:
            return lines[path]
        cut = max(path.rfind("."), path.rfind("["))
        if cut <= 0:
            return lines.get(path)
        path = path[:cut]
    return None


def _build_job(doc) -> AnalysisJob:
    if not isinstance(doc, dict):
        raise ConfigError("job document must be a mapping", "")
    _check_keys(doc, TOP_KEYS, "")
    for k in ("schema_version", "model", "theta0"):
        if k not in doc:
            raise ConfigError(f"missing required key '{k}'", k)
    version = _typed(doc["schema_version"], int, "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})", "schema_version")

    model = _parse_model(doc["model"])
    theta0 = parse_vector(doc["theta0"], model, "theta0", complete=True)
    if not model.theta_in_domain(theta0):
        raise ConfigError(f"theta0 {theta0.tolist()} outside the parameter domain", "theta0")

    has_chart, has_builder = "chart" in doc, "builder" in doc
    if has_chart == has_builder:
        raise ConfigError("exactly one of 'chart' or 'builder' must be given", "chart" if has_chart else "")
    chart = builder = None
    if has_chart:
        chart = parse_chart(doc["chart"], model)
        chart = Chart(chart.observables, tuple(theta0))
    else:
        builder = _parse_builder(doc["builder"], model)

    arcs = doc.get("arcs", [])
    if not isinstance(arcs, list):
        raise ConfigError("arcs must be a list", "arcs")
    arcs = tuple(parse_arc(a, model, theta0, f"arcs[{i}]") for i, a in enumerate(arcs))
    ids = [a.id for a in arcs]
    for i, a in enumerate(ids):
        if a in ids[:i]:
            raise ConfigError(f"duplicate arc id '{a}'", f"arcs[{i}].id")

    grid = _parse_section(doc.get("grid", {}), GRID_KEYS, "grid", GridSpec)
    seed = _typed(doc.get("seed", 0), int, "seed")
    if seed < 0:
        raise ConfigError("seed must be non-negative", "seed")
    budget = _parse_section(doc.get("budget", {}), BUDGET_KEYS, "budget", Budget).with_(seed=seed)

    outputs = _mapping(doc.get("outputs", {}), "outputs")
    _check_keys(outputs, OUTPUT_KEYS, "outputs")
    report = outputs.get("report")
    traces = outputs.get("traces")
    if report is not None:
        _typed(report, str, "outputs.report")
    if traces is not None:
        _typed(traces, str, "outputs.traces")
    timings = _typed(outputs.get("timings", False), bool, "outputs.timings")

    return AnalysisJob(model, theta0, chart, builder, arcs, grid, budget, seed, report, traces, timings)


def _parse_builder(spec, model) -> BuilderSpec:
    spec = _mapping(spec, "builder")
    _check_keys(spec, BUILDER_KEYS, "builder")
    pool = parse_pool(spec.get("pool", "default"), model)
    seed_chart = parse_chart(spec.get("seed_chart", []), model, "builder.seed_chart")
    target = _typed(spec.get("target_order", 4), int, "builder.target_order")
    iters = _typed(spec.get("max_iters", 20), int, "builder.max_iters")
    if target < 1 or iters < 1:
        raise ConfigError("target_order and max_iters must be positive", "builder")
    grid = GridSpec(floor=BUILDER_FLOOR)
    if "grid" in spec:
        grid = _parse_section({"floor": BUILDER_FLOOR, **_mapping(spec["grid"], "builder.grid")},
                              GRID_KEYS, "builder.grid", GridSpec)
    return BuilderSpec(pool, seed_chart, target, iters, grid)


def load_job(path) -> AnalysisJob:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read job file: {exc}", str(path)) from None
    return parse_config(text)
