"""Acceptance criteria: observed orders on the desk presets, property
suites, scheme sanity checks and determinism.

Each test records one ``PASS``/``FAIL`` line, printed in the pytest
terminal summary.
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fracdg.dg import InitialCoefficients, InitialFunction, ProblemData, solve
from fracdg.fem import assemble, build_interval_mesh, l2_project
from fracdg.frac_ops import TimeGrid
from fracdg.harness import emit_tables, get_preset, run_experiment
from fracdg.metrics import nodal_error
from fracdg.reference import SpectralReference

TESTS = Path(__file__).parent


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return tmp_path_factory.mktemp("reference-cache")


@pytest.fixture(scope="module")
def runs(cache):
    done = {}

    def get(name):
        if name not in done:
            t0 = time.perf_counter()
            rec = run_experiment(get_preset(name), cache_dir=cache)
            done[name] = (rec, time.perf_counter() - t0)
        return done[name]
    return get


def report(log, criterion, title, parts, ok):
    line = f"{'PASS' if ok else 'FAIL'} {criterion} {title}: " + "; ".join(parts)
    log.append(line)
    print(line)
    assert ok, line


def preset_parts(runs, names):
    parts, ok, elapsed = [], True, 0.0
    for name in names:
        rec, wall = runs(name)
        elapsed += wall
        for c in rec.checks:
            parts.append(f"{name} {c['metric']} {c['value']:.2f} in [{c['lo']}, {c['hi']}]")
        ok &= rec.passed and rec.monotone
        if not rec.monotone:
            parts.append(f"{name} E1 not monotone")
        parts.extend(f"{name} {e}" for e in rec.errors)
    return parts, ok, elapsed


@pytest.mark.parametrize("criterion, title, names, budget", [
    ("1", "1a temporal", ["exp1-f-smooth-tau-desk"], 300.0),
    ("2", "1a spatial", ["exp1-f-smooth-h-desk"], 600.0),
    ("3", "1b spatial", ["exp1-f-rough-h-desk"], None),
    ("4", "1c temporal and spatial", ["exp1-u0-tau-desk", "exp1-u0-h-desk"], None),
    ("5", "Dirac data in 2D", ["exp2-dirac-f-h-desk", "exp2-dirac-f-tau-desk",
                               "exp2-dirac-u0-h-desk", "exp2-dirac-u0-tau-desk"], 900.0),
])
def test_convergence_orders(criterion, title, names, budget, runs, acceptance_log):
    parts, ok, elapsed = preset_parts(runs, names)
    if budget is not None:
        ok &= elapsed <= budget
        parts.append(f"{elapsed:.1f} s <= {budget:.0f} s")
    else:
        parts.append(f"{elapsed:.1f} s")
    report(acceptance_log, criterion, title, parts, ok)


def run_suite(path, selector):
    env = dict(os.environ, HYPOTHESIS_PROFILE="default")
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(TESTS / path), "-k", selector],
                          capture_output=True, text=True, env=env, cwd=TESTS.parent)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    return proc.returncode == 0, elapsed, summary


@pytest.mark.parametrize("criterion, title, path, selector", [
    ("6a", "Mittag-Leffler properties", "test_mittag_leffler.py",
     "exponential_range or erfc_range or ode_residual"),
    ("6b", "fractional operator identities", "test_frac_ops.py",
     "semigroup or adjoint or positivity or coercivity"),
])
def test_property_suites(criterion, title, path, selector, acceptance_log):
    ok, elapsed, summary = run_suite(path, selector)
    ok &= elapsed <= 60.0
    report(acceptance_log, criterion, title, [summary, f"{elapsed:.1f} s <= 60 s"], ok)


def test_scheme_sanity(acceptance_log):
    t0 = time.perf_counter()
    parts, ok = [], True

    # single eigenmode against its Mittag-Leffler closed form
    space = assemble(build_interval_mesh(256))
    grid = TimeGrid.uniform(1.0, 1024)
    mode = lambda x: np.sin(np.pi * x)
    U = solve(ProblemData(0.4, 1.0, InitialFunction(mode)), space, grid)
    err = nodal_error(U, SpectralReference.from_function(0.4, 1.0, mode, K=1))
    ok &= err <= 0.01
    parts.append(f"single-mode max nodal error {err:.4f} <= 0.01")

    # stability for random initial data
    space = assemble(build_interval_mesh(64))
    grid = TimeGrid.uniform(1.0, 128)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        c = l2_project(space, lambda x, a=rng.standard_normal(8):
                       sum(a[k] * np.sin((k + 1) * np.pi * x) for k in range(8)))
        c = c + 0.1 * rng.standard_normal(space.N)
        U = solve(ProblemData(0.4, 1.0, InitialCoefficients(c)), space, grid)
        worst = max(worst, U.l2_norms().max() / space.l2_norm(c))
    ok &= worst <= 1.05
    parts.append(f"max_j |U_j| / |P_h u0| = {worst:.4f} <= 1.05 over 20 draws")

    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 60.0
    parts.append(f"{elapsed:.1f} s <= 60 s")
    report(acceptance_log, "6c", "scheme sanity", parts, ok)


def test_determinism(runs, tmp_path, acceptance_log):
    parts, ok = [], True
    for name in ("exp1-u0-tau-desk", "exp2-dirac-f-tau-desk"):
        first, _ = runs(name)
        # fresh cache: the reference is recomputed as well
        again = run_experiment(get_preset(name), cache_dir=tmp_path / name)
        same = emit_tables(first, "csv").encode() == emit_tables(again, "csv").encode()
        ok &= same
        parts.append(f"{name} CSV {'identical' if same else 'differs'}")
    report(acceptance_log, "7", "determinism", parts, ok)
