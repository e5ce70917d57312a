"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test also checks its wall-clock budget.  A summary line per
criterion is printed at the end of the pytest session (see conftest).
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest

from koopman_lattice.config import load_config, parse_config
from koopman_lattice.dynamics import MarkovChain, markov_koopman_matrix
from koopman_lattice.galerkin import eigendecompose
from koopman_lattice.lattice import finite_spectrum_lattice_closure, unit_disk_check
from koopman_lattice.measure import ProbabilityMeasure, l2_norm, sample
from koopman_lattice.observables import ClampParams, FunctionObservable, clamp, clamp_values, product
from koopman_lattice.report import run

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir)
CONFIGS = os.path.join(ROOT, "configs")
ALPHA = np.sqrt(2) - 1
P_EXAMPLE = [[0.9, 0.1], [0.5, 0.5]]


def config(name):
    return load_config(os.path.join(CONFIGS, name))


def nearest_gap(computed, exact):
    computed, exact = np.asarray(computed), np.asarray(exact)
    return np.min(np.abs(computed[:, None] - exact[None, :]), axis=1)


@pytest.fixture(scope="module")
def rotation_report():
    t0 = time.perf_counter()
    rep = run(config("rotation.json"))
    return rep.to_dict(), time.perf_counter() - t0


@pytest.fixture(scope="module")
def contraction_report():
    t0 = time.perf_counter()
    rep = run(config("contraction.json"))
    return rep.to_dict(), time.perf_counter() - t0


def eigenvalues(rep):
    return np.array([complex(r["eigenvalue"]) for r in rep["spectrum"]["eigenvalues"]])


@pytest.mark.acceptance(1, "Markov spectrum {0.4, 1} within 1e-12, 0.16 flagged as violation, < 1 s")
def test_markov_reproduction(record_property):
    t0 = time.perf_counter()
    lam = eigendecompose(markov_koopman_matrix(MarkovChain(P_EXAMPLE))).eigenvalues
    closure = finite_spectrum_lattice_closure(lam)
    rep = run(config("markov_two_state.json")).to_dict()
    elapsed = time.perf_counter() - t0
    record_property("elapsed", elapsed)

    assert np.max(np.abs(lam - [1.0, 0.4])) <= 1e-12
    assert np.max(nearest_gap([1.0, 0.4], lam)) <= 1e-12
    assert closure.verdict == "violation"
    assert any(abs(p - 0.16) <= 1e-12 for p in closure.unmatched_products)
    assert any(abs(r.product - 0.16) <= 1e-12 and r.verdict == "violation" for r in closure.records)
    # the same through the configured pipeline
    assert np.max(np.abs(eigenvalues(rep) - [1.0, 0.4])) <= 1e-12
    assert rep["markov_closure"]["verdict"] == "violation"
    assert any(abs(complex(p) - 0.16) <= 1e-12 for p in rep["markov_closure"]["unmatched_products"])
    assert elapsed < 1.0


@pytest.mark.acceptance(2, "rotation ||lambda|-1| <= 1e-8 and Markov max |lambda| = 1, < 5 s")
def test_unit_disk_bound(record_property):
    t0 = time.perf_counter()
    rep = run(parse_config({
        "system": {"kind": "circle-rotation", "alpha": float(ALPHA)},
        "dictionary": {"type": "fourier", "order": 8},
        "quadrature": {"method": "grid-1d", "n": 1024},
        "analyses": {"spectrum": True},
    })).to_dict()
    markov = eigendecompose(markov_koopman_matrix(MarkovChain(P_EXAMPLE))).eigenvalues
    elapsed = time.perf_counter() - t0
    record_property("elapsed", elapsed)

    lam = eigenvalues(rep)
    assert lam.size == 17
    assert np.all(np.abs(lam) <= 1 + 1e-8)
    assert np.max(np.abs(np.abs(lam) - 1)) <= 1e-8
    assert rep["spectrum"]["unit_disk"]["inside"] is True
    assert unit_disk_check(markov)[0]
    assert abs(np.max(np.abs(markov)) - 1.0) <= 1e-12
    assert elapsed < 5.0


@pytest.mark.acceptance(3, "rotation eigenvalues within 1e-8, contraction within 5x stderr, < 30 s")
def test_eigenvalue_recovery(rotation_report, contraction_report, record_property):
    rot, t_rot = rotation_report
    con, t_con = contraction_report
    record_property("elapsed", t_rot + t_con)

    exact = np.exp(2j * np.pi * np.arange(-8, 9) * ALPHA)
    lam = eigenvalues(rot)
    assert lam.size == exact.size
    assert np.max(nearest_gap(lam, exact)) <= 1e-8
    assert np.max(nearest_gap(exact, lam)) <= 1e-8

    lam = eigenvalues(con)
    stderr = np.array([r["stderr"] for r in con["spectrum"]["eigenvalues"]])
    exact = 0.5 ** np.arange(7)
    assert lam.size == 7
    # eigenvalues are reported in descending modulus, matching 1, 0.5, ..., 0.5^6
    assert np.all(np.abs(lam - exact) <= 5 * stderr)
    assert np.all(stderr > 0)
    assert t_rot + t_con < 30.0


@pytest.mark.acceptance(4, "catalog lattice products closed on rotation and contraction, < 30 s")
def test_lattice_closure(rotation_report, contraction_report, record_property):
    rot, t_rot = rotation_report
    con, t_con = contraction_report
    record_property("elapsed", t_rot + t_con)
    assert rot["config"]["tolerances"]["membership"] == "auto"
    assert len(rot["lattice"]["records"]) == 45
    assert all(r["verdict"] == "closed" for r in rot["lattice"]["records"])
    assert len(con["lattice"]["records"]) == 16
    assert all(r["verdict"] == "closed" for r in con["lattice"]["records"])
    assert rot["lattice"]["verdict"] == con["lattice"]["verdict"] == "closed"
    assert t_rot + t_con < 30.0


def _random_params(rng):
    k = float(rng.choice([1.0, 2.0, 3.0, rng.uniform(1.0, 30.0)]))
    choice = rng.integers(4)
    m = [1.0 / k, k ** 3, rng.uniform(1.0 / k, 1.0 / k + 1.0), 10 ** rng.uniform(np.log10(1 / k), 4)][choice]
    return ClampParams(float(max(m, 1.0 / k)), k)


def _modulus_ok(v, p):
    moduli = (np.abs(v), np.hypot(v.real, v.imag))
    return all(np.all(r >= p.lower) and np.all(r <= p.m) for r in moduli)


@pytest.mark.acceptance(5, "clamp band, idempotence, no-op and product floor on 1e4 observables, < 10 s")
def test_clamp_property_suite(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20261015)
    s = sample(ProbabilityMeasure.uniform_box([0.0], [1.0]), 32, seed=5)
    x = s.points
    n_trials = 10_000
    for trial in range(n_trials):
        p = _random_params(rng)
        scale = 10 ** rng.uniform(-8, 8)
        complex_valued = trial % 2 == 1
        re = rng.standard_normal(32) * scale
        vals = re + 1j * rng.standard_normal(32) * scale if complex_valued else re
        if trial % 7 == 0:
            vals[rng.integers(32)] = 0.0
        f = FunctionObservable(lambda pts, v=vals: v[: len(pts)], "random")

        g = clamp(f, p)
        gv = g(x)
        assert _modulus_ok(gv, p)
        assert np.array_equal(clamp(g, p)(x), gv)

        # values already inside the band are untouched
        r = p.lower + rng.random(32) * (p.m - p.lower)
        signs = rng.choice([-1.0, 1.0], 32)
        inside = r * signs if not complex_valued else r * np.exp(1j * rng.uniform(-np.pi, np.pi, 32))
        inside_ok = (np.abs(inside) >= p.lower) & (np.abs(inside) <= p.m) & \
            (np.hypot(inside.real, inside.imag) >= p.lower) & (np.hypot(inside.real, inside.imag) <= p.m)
        out = clamp_values(inside, p)
        if complex_valued:
            assert np.max(np.abs(out - inside)[inside_ok], initial=0.0) <= 1e-15
        else:
            assert np.array_equal(out, inside)

        # pre-normalization norm of the clamp product
        other = FunctionObservable(lambda pts, v=np.roll(vals, 3): v[: len(pts)], "random")
        h = product(g, clamp(other, p))
        assert l2_norm(h, s) >= 1.0 / p.k ** 2 - 1e-12
    elapsed = time.perf_counter() - t0
    record_property("elapsed", elapsed)
    assert elapsed < 10.0


@pytest.mark.acceptance(6, "rotation Weyl-sequence residuals <= 1e-8 within the bound, contraction trace, < 30 s")
def test_weyl_sequence_trace(rotation_report, contraction_report, record_property):
    rot, t_rot = rotation_report
    con, t_con = contraction_report
    record_property("elapsed", t_rot + t_con)
    ws = rot["weyl_seq"]
    assert abs(complex(ws["lambda"]) - np.exp(2j * np.pi * ALPHA)) <= 1e-15
    assert abs(complex(ws["eta"]) - np.exp(4j * np.pi * ALPHA)) <= 1e-15
    assert [s["k"] for s in ws["steps"]] == list(range(1, 11))
    for s in ws["steps"]:
        assert s["m"] == s["k"] ** 3
        assert s["residual"] <= 1e-8
        assert s["bound"] == pytest.approx(4.0 / s["k"], rel=1e-15)
        assert s["bound_satisfied"] is True

    wc = con["weyl_seq"]
    assert [s["k"] for s in wc["steps"]] == list(range(1, 11))
    for s in wc["steps"]:
        assert s["bound"] == pytest.approx(3.0 / s["k"], rel=1e-15)
        assert isinstance(s["bound_satisfied"], bool)
        assert np.isfinite(s["residual"])
    assert t_rot + t_con < 30.0


@pytest.mark.acceptance(7, "byte-identical JSON reports across two runs of each acceptance config")
@pytest.mark.parametrize("name", ["markov_two_state.json", "rotation.json", "contraction.json", "doubling.json"])
def test_determinism(tmp_path, name):
    blobs = []
    for run_id in ("first", "second"):
        out = tmp_path / run_id
        proc = subprocess.run(
            [sys.executable, "-m", "koopman_lattice", "all", "--config", os.path.join(CONFIGS, name),
             "--out", str(out), "--format", "json"],
            capture_output=True, text=True, check=False)
        assert proc.returncode == 0, proc.stderr
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]
    assert len(blobs[0]) > 0
