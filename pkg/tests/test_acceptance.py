"""Acceptance gate: every criterion at its stated tolerance, plus determinism.

The suite runs once into a temporary directory; each criterion is then a
separate test.  The determinism check reruns the whole suite and compares
artifact bytes.
"""

import io

import pytest

from conftest import ACCEPTANCE_LINES
from weakasym.acceptance import RUNTIME_LIMITS, SUITES
from weakasym.cli import run_accept


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept_a")
    ok, results, times = run_accept("all", str(out), stream=io.StringIO())
    return out, {r.number: (r, t) for r, t in zip(results, times)}


def _record(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.parametrize("number", SUITES["all"])
def test_criterion(first_run, number):
    _, res = first_run
    r, t = res[number]
    within = t < RUNTIME_LIMITS[number]
    _record(f"{r.line()} | runtime {t:.1f}s (limit {RUNTIME_LIMITS[number]:.0f}s)")
    assert r.passed, r.line()
    assert within, f"criterion {number} took {t:.1f}s"


def test_criterion_8_determinism(first_run, tmp_path):
    a, _ = first_run
    run_accept("all", str(tmp_path), stream=io.StringIO())
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in tmp_path.iterdir())
    differing = [n for n in names if (a / n).read_bytes() != (tmp_path / n).read_bytes()]
    passed = not differing and "manifest.json" in names
    tag = "PASS" if passed else "FAIL"
    _record(f"[{tag}] criterion 8 (determinism): artifacts={len(names)}, differing={differing} | thresholds: "
            "bit-identical rerun")
    assert passed
