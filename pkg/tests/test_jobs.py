import copy
import glob
import os

import numpy as np
import pytest
import yaml

from obschart.errors import ConfigError
from obschart.jobs import load_job, parse_config
from obschart.runner import job_echo

JOBS_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "jobs")
SHIPPED = sorted(glob.glob(os.path.join(JOBS_DIR, "*.job")))

MINIMAL = """
schema_version: 1
model: {name: gmm}
theta0: [0.0, 0.0, 0.0]
chart: [m1, k2, k3]
arcs:
  - {id: mu, coefficients: [[1.0, 0.0, 0.0]]}
"""


def test_minimal_job_gets_defaults():
    job = parse_config(MINIMAL)
    assert job.chart.ids == ["m1", "k2", "k3"]
    assert job.grid.t0 == 0.1 and job.grid.count == 10 and job.grid.floor == 1e-10
    assert job.budget.quad_nodes == 200 and job.seed == 0
    assert len(job.arcs) == 1 and np.array_equal(job.arcs[0].base_point, [0, 0, 0])


def test_chart_and_builder_are_exclusive():
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(MINIMAL + "builder: {pool: default}\n")
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config("schema_version: 1\nmodel: {name: gmm}\ntheta0: [0, 0, 0]\n")


def test_named_coefficients_and_parameters():
    job = parse_config(
        "schema_version: 1\nmodel: {name: tanh, w0: 2.0}\ntheta0: {a: 0, w: 2, b: 0}\nchart: default\n"
        "arcs:\n  - {id: wa, coefficients: [{w: 1}, {a: 0.5}]}\n"
    )
    np.testing.assert_array_equal(job.arcs[0].coefficients, [[0, 1, 0], [0.5, 0, 0]])
    assert len(job.chart) == 3


@pytest.mark.parametrize(
    "patch, path",
    [
        ("model: {name: gmm, sigmaa: 1}", "model.sigmaa"),
        ("model: {name: lasso}", "model.name"),
        ("theta0: [0, 0]", "theta0"),
        ("theta0: {mu: 0, delta: 0}", "theta0"),
        ("theta0: [0, 0, 0.7]", "theta0"),
        ("chart: [m1, q7]", "chart[1]"),
        ("chart: [m1, m1]", "chart"),
        ("grid: {t0: -1}", "grid"),
        ("grid: {count: ten}", "grid.count"),
        ("budget: {method: magic}", "budget"),
        ("seed: -3", "seed"),
        ("schema_version: 2", "schema_version"),
        ("arcs: [{id: z, coefficients: [[0, 0, 0]]}]", "arcs[0].coefficients"),
        ("arcs: [{id: z, coefficients: [{nu: 1}]}]", "arcs[0].coefficients[0].nu"),
        ("arcs: [{id: a, coefficients: [[1, 0, 0]]}, {id: a, coefficients: [[0, 1, 0]]}]", "arcs[1].id"),
        ("outputs: {reprt: x.json}", "outputs.reprt"),
    ],
)
def test_semantic_errors_name_the_path(patch, path):
    doc = yaml.safe_load(MINIMAL)
    doc.update(yaml.safe_load(patch))
    with pytest.raises(ConfigError) as exc:
        parse_config(yaml.safe_dump(doc))
    assert exc.value.path == path


def test_errors_carry_line_numbers():
    text = MINIMAL.replace("chart: [m1, k2, k3]", "chart: [m1, k2, k3]\nbogus: 1")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 6 and "line 6" in str(exc.value)


def test_yaml_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="YAML parse error") as exc:
        parse_config("schema_version: 1\nmodel: {name: gmm\n")
    assert exc.value.line is not None


def test_builder_pool_specs():
    job = parse_config(
        "schema_version: 1\nmodel: {name: rrr}\ntheta0: [0, 0, 0, 0]\n"
        "builder:\n  pool: {cross_moments: true, bumps: {centers: [-1, 1], width: 0.5}}\n  target_order: 3\n"
    )
    assert len(job.builder.pool) == 4 + 2 * 4
    assert job.builder.target_order == 3
    with pytest.raises(ConfigError):
        parse_config("schema_version: 1\nmodel: {name: gmm}\ntheta0: [0, 0, 0]\nbuilder: {pool: {splines: 3}}\n")


@pytest.mark.parametrize("path", SHIPPED, ids=os.path.basename)
def test_shipped_jobs_parse(path):
    job = load_job(path)
    assert job.arcs


def test_missing_job_file():
    with pytest.raises(ConfigError):
        load_job("/nonexistent/job.yaml")


# -- fuzzing ----------------------------------------------------------------


def _key_paths(node, prefix=()):
    if isinstance(node, dict):
        for k, v in node.items():
            yield prefix + (k,)
            yield from _key_paths(v, prefix + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from _key_paths(v, prefix + (i,))


def _parent(doc, path):
    for p in path[:-1]:
        doc = doc[p]
    return doc


CORRUPT_VALUES = ["bogus", -7, 0, [1, "x"], {"nested": 1}, None, 1.5e3, True]


def _mutations(rng, docs, n):
    out = []
    while len(out) < n:
        name, doc = docs[rng.integers(len(docs))]
        paths = list(_key_paths(doc))
        path = paths[rng.integers(len(paths))]
        mutated = copy.deepcopy(doc)
        parent = _parent(mutated, path)
        key = path[-1]
        kind = ["rename", "delete", "retype"][rng.integers(3)]
        if kind == "rename":
            parent[f"{key}_x"] = parent.pop(key)
        elif kind == "delete":
            del parent[key]
        else:
            new = CORRUPT_VALUES[rng.integers(len(CORRUPT_VALUES))]
            if new == parent[key]:
                continue
            parent[key] = new
        out.append((name, kind, path, doc, mutated))
    return out


def test_single_key_corruptions_are_valid_or_pointed():
    docs = [(os.path.basename(p), yaml.safe_load(open(p))) for p in SHIPPED]
    rng = np.random.default_rng(2024)
    counts = {"valid": 0, "rejected": 0}
    for name, kind, path, original, mutated in _mutations(rng, docs, 100):
        try:
            job = parse_config(yaml.safe_dump(mutated))
        except ConfigError as exc:
            counts["rejected"] += 1
            assert exc.path is not None, (name, kind, path, str(exc))
            assert str(exc)
            continue
        counts["valid"] += 1
        # renamed keys are never accepted
        assert kind != "rename", (name, path)
        if kind == "retype":
            # the corrupt value was not silently replaced by the original/default
            base = job_echo(parse_config(yaml.safe_dump(original)))
            assert job_echo(job) != base, (name, path)
    assert counts["rejected"] > 0 and counts["valid"] > 0
