import csv
import json
import os

import numpy as np
import pytest

from koopman_lattice.cli import main
from koopman_lattice.config import load_config, parse_config
from koopman_lattice.errors import ConfigError
from koopman_lattice.report import (
    EIGEN_COLUMNS, LATTICE_COLUMNS, WEYLSEQ_COLUMNS, canonical_json, emit, run,
)

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
MARKOV = {"system": {"kind": "markov", "matrix": [[0.9, 0.1], [0.5, 0.5]]}}


def write(tmp_path, data, name="run.json"):
    p = tmp_path / name
    p.write_text(data if isinstance(data, str) else json.dumps(data, indent=2))
    return str(p)


def test_minimal_rotation_config(tmp_path):
    cfg = load_config(write(tmp_path, {
        "system": {"kind": "circle-rotation", "alpha": 0.25},
        "dictionary": {"type": "fourier", "order": 2},
        "quadrature": {"method": "grid-1d", "n": 128},
    }))
    r = cfg.resolved
    assert r["tolerances"] == {"membership": "auto", "closure": 1e-9, "unit_disk": 1e-8,
                               "regularization": 1e-10}
    assert r["quadrature"]["n"] == 128 and r["quadrature"]["method"] == "grid-1d"
    assert r["measure"]["kind"] == "uniform-circle"
    assert len(cfg.dictionary) == 5


def test_markov_config_forces_exact_quadrature(tmp_path):
    cfg = load_config(write(tmp_path, MARKOV))
    assert cfg.quadrature["method"] == "exact-discrete"
    assert cfg.is_markov


def test_row_sum_error_names_row(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(write(tmp_path, {"system": {"kind": "markov", "matrix": [[0.5, 0.5], [0.5, 0.4]]}}))
    assert info.value.path == "system.matrix[1]"
    assert "row 1" in str(info.value)


def test_parse_error_has_line_and_column(tmp_path):
    with pytest.raises(ConfigError, match=r"line 3, column \d+"):
        load_config(write(tmp_path, '{\n  "system": {"kind": "doubling"},\n  oops\n}'))


def test_unknown_field_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config({**MARKOV, "tolerances": {"membership": 1e-6, "closure_tol": 1e-3}})
    assert info.value.path == "tolerances.closure_tol"


@pytest.mark.parametrize("data, path", [
    ({"system": {"kind": "doubling"}, "tolerances": {"closure": 0}}, "tolerances.closure"),
    ({"system": {"kind": "logistic", "r": 5}}, "system"),
    ({"system": {"kind": "warp"}}, "system.kind"),
    ({**MARKOV, "dictionary": {"type": "fourier", "order": 2}}, "dictionary"),
    ({"measure": {"kind": "gaussian"}}, "system"),
])
def test_validation_paths(data, path):
    with pytest.raises(ConfigError) as info:
        parse_config(data)
    assert info.value.path == path


def test_matrix_file_relative_to_config(tmp_path):
    (tmp_path / "P.txt").write_text("0.9 0.1\n0.5 0.5\n")
    cfg = load_config(write(tmp_path, {"system": {"kind": "markov", "matrix_file": "P.txt"}}))
    assert np.array_equal(cfg.system.transition_matrix, [[0.9, 0.1], [0.5, 0.5]])
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, {"system": {"kind": "markov", "matrix_file": "missing.txt"}}))


def test_markov_run():
    rep = run(parse_config(MARKOV)).to_dict()
    lam = [complex(r["eigenvalue"]) for r in rep["spectrum"]["eigenvalues"]]
    assert np.max(np.abs(np.array(lam) - [1.0, 0.4])) <= 1e-12
    mc = rep["markov_closure"]
    assert mc["verdict"] == "violation"
    assert any(abs(p - 0.16) <= 1e-12 for p in mc["unmatched_products"])


def test_rotation_catalog_run():
    cfg = load_config(os.path.join(CONFIGS, "rotation.json"))
    rep = run(cfg).to_dict()
    assert rep["lattice"]["verdict"] == "closed"
    assert all(r["verdict"] == "closed" for r in rep["lattice"]["records"])
    assert len(rep["weyl_seq"]["steps"]) == 10


def test_empty_selection_gives_config_echo_only():
    cfg = parse_config({**MARKOV, "analyses": {}})
    rep = run(cfg).to_dict()
    assert rep["analyses_run"] == []
    for key in ("spectrum", "lattice", "weyl_seq", "markov_closure"):
        assert rep[key]["ran"] is False
    assert rep["spectrum"]["eigenvalues"] == [] and rep["lattice"]["records"] == []
    assert rep["config"] == cfg.resolved


def test_canonical_json():
    assert canonical_json({"b": 0.1, "a": [1, 2.5j, None, True]}) == \
        '{"a":[1,{"im":2.5,"re":0},null,true],"b":0.10000000000000001}\n'


def test_emit_json_and_csv(tmp_path):
    cfg = parse_config({"system": {"kind": "circle-rotation", "alpha": 0.1},
                        "dictionary": {"type": "fourier", "order": 1},
                        "quadrature": {"method": "grid-1d", "n": 64},
                        "analyses": {"spectrum": True, "weyl_seq": {"f": 1, "g": 1, "k_max": 10}}})
    rep = run(cfg)
    paths = emit(rep, str(tmp_path / "j"), "json")
    assert [os.path.basename(p) for p in paths] == ["report.json"]
    assert json.loads(open(paths[0]).read())["config_digest"] == rep.config_digest

    paths = emit(rep, str(tmp_path / "c"), "csv-bundle")
    rows = {os.path.basename(p): list(csv.reader(open(p))) for p in paths}
    assert rows["eigenvalues.csv"][0] == EIGEN_COLUMNS and len(rows["eigenvalues.csv"]) == 4
    assert rows["lattice.csv"] == [LATTICE_COLUMNS]
    ws = rows["weylseq.csv"]
    assert ws[0] == WEYLSEQ_COLUMNS == ["k", "m", "residual", "bound", "bound_satisfied"]
    assert len(ws) == 11
    assert [int(r[0]) for r in ws[1:]] == list(range(1, 11))
    assert [int(r[1]) for r in ws[1:]] == [k ** 3 for k in range(1, 11)]


def test_cli_exit_codes(tmp_path, capsys):
    good = write(tmp_path, MARKOV)
    assert main(["markov", "--config", good, "--out", str(tmp_path / "o")]) == 0
    assert os.path.exists(tmp_path / "o" / "report.json")
    bad = write(tmp_path, {"system": {"kind": "markov", "matrix": [[0.9, 0.0], [0.5, 0.5]]}}, "bad.json")
    assert main(["all", "--config", bad, "--out", str(tmp_path / "b")]) == 1
    assert main(["all", "--config", str(tmp_path / "nope.json")]) == 3
    assert main(["markov", "--config", write(tmp_path, {"system": {"kind": "doubling"}}, "d.json")]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["markov", "--config", good, "--out", str(blocker / "sub")]) == 3
    # a non-credible eigenpair for the Weyl sequence is a numerical phase error
    num = write(tmp_path, {"system": {"kind": "circle-rotation", "alpha": 0.1},
                           "dictionary": {"type": "fourier", "order": 1},
                           "quadrature": {"method": "grid-1d", "n": 64},
                           "tolerances": {"membership": 1e-300},
                           "analyses": {"lattice_check": {"pairs": "all-catalog", "max_order": 1}}},
                "num.json")
    assert main(["all", "--config", num, "--out", str(tmp_path / "n")]) == 2
    assert "lattice phase failed" in capsys.readouterr().err


def test_cli_determinism_and_seed_override(tmp_path):
    cfg = write(tmp_path, {"system": {"kind": "affine-contraction", "a": [0.5]},
                           "dictionary": {"type": "monomial", "order": 3},
                           "quadrature": {"method": "monte-carlo", "n": 4000, "seed": 3}})
    outs = []
    for name, extra in (("a", []), ("b", []), ("c", ["--seed", "4"])):
        assert main(["all", "--config", cfg, "--out", str(tmp_path / name)] + extra) == 0
        outs.append((tmp_path / name / "report.json").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]
    assert json.loads(outs[2])["config"]["quadrature"]["seed"] == 4
