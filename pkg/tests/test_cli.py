import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest

from l2torsion import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def parse(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return meta, rows


def write(tmp_path, doc, name="job.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


def test_fk_det_jensen(capsys):
    code, out, _ = run(capsys, "fk-det", "--config", CONFIGS / "t-minus-2.json")
    meta, rows = parse(out)
    assert code == 0
    assert float(rows[0]["log_det"]) == pytest.approx(math.log(2), abs=1e-10)
    assert meta["policy"]["tol"] == 1e-10


def test_density_grid(capsys):
    code, out, _ = run(capsys, "density", "--config", CONFIGS / "circle.json", "--grid", "0:2:64")
    _, rows = parse(out)
    assert code == 0 and len(rows) == 64
    lam = np.array([float(r["lambda"]) for r in rows])
    F = np.array([float(r["F"]) for r in rows])
    assert np.max(np.abs(F - 2 / np.pi * np.arcsin(lam / 2))) < 1e-4


def test_torsion_analytic_circle(capsys):
    code, out, _ = run(capsys, "torsion-analytic", "--config", CONFIGS / "circle-model.json")
    _, rows = parse(out)
    total = [r for r in rows if r["degree"] == "total"][0]
    assert code == 0 and abs(float(total["contribution"])) < 1e-8


def test_cusp_volumes_decay(capsys):
    code, out, _ = run(capsys, "cusp-volumes", "--config", CONFIGS / "n3k1.json")
    _, rows = parse(out)
    assert code == 0
    for r in rows:
        assert float(r["boundary_ratio"]) == pytest.approx(math.exp(-2 * float(r["R"])), rel=1e-14)


def test_tol_override_is_recorded(capsys):
    _, out, _ = run(capsys, "fk-det", "--config", CONFIGS / "t-minus-2.json", "--tol", "1e-6", "--threads", "2")
    meta, _ = parse(out)
    assert meta["policy"]["tol"] == 1e-6 and meta["policy"]["threads"] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["betti", "--config", CONFIGS / "torus2-twisted.json"],
        ["assemble", "--config", CONFIGS / "torus2-twisted.json"],
        ["torsion-fin", "--config", CONFIGS / "finite.json"],
        ["zeta-derivative", "--config", CONFIGS / "circle-model.json"],
        ["tail", "--config", CONFIGS / "circle-model.json"],
        ["fit-kappa", "--config", CONFIGS / "h3-model.json"],
        ["pnfb-report", "--config", CONFIGS / "pnfb.json", "--grid", "0.1:1:4"],
        ["anomaly", "--config", CONFIGS / "ledger.json"],
        ["convergence", "--config", CONFIGS / "ledger.json"],
    ],
)
def test_subcommands_emit_metadata_and_header(capsys, argv):
    code, out, _ = run(capsys, *argv)
    meta, rows = parse(out)
    assert code == 0 and meta["subcommand"] == argv[0] and rows


def test_convergence_values(capsys):
    _, out, _ = run(capsys, "convergence", "--config", CONFIGS / "ledger.json")
    _, rows = parse(out)
    assert float(rows[0]["limit"]) == pytest.approx(1.0, abs=1e-8)
    assert float(rows[0]["rate"]) == pytest.approx(2.0, rel=1e-6)


def test_induce(capsys, tmp_path):
    p = write(tmp_path, {"input": {"cw": {"builtin": "circle"}}, "params": {"embed": [1], "d": 2}})
    code, out, _ = run(capsys, "induce", "--config", p)
    _, rows = parse(out)
    assert code == 0 and all(r["betti_before"] == r["betti_after"] for r in rows)


def test_custom_cw_and_character(capsys, tmp_path):
    doc = {
        "input": {"cw": {"d": 1, "cells": [1, 1], "rep": {"character": [[3, 0]]},
                         "boundaries": [[{"exponent": [1], "block": [[1]]}, {"exponent": [0], "block": [[-1]]}]]}},
    }
    code, out, _ = run(capsys, "torsion-zd", "--config", write(tmp_path, doc))
    _, rows = parse(out)
    assert code == 0 and float(rows[-1]["log_det"]) == pytest.approx(math.log(3), abs=1e-8)


def test_finite_complex_with_complex_entries(capsys, tmp_path):
    doc = {"input": {"complex": {"mats": [[[[0, 2]]]]}}}
    _, out, _ = run(capsys, "torsion-fin", "--config", write(tmp_path, doc))
    _, rows = parse(out)
    assert float(rows[0]["log_torsion"]) == pytest.approx(math.log(2))


def test_output_file(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, text, _ = run(capsys, "torsion-fin", "--config", CONFIGS / "finite.json", "--out", out)
    assert code == 0 and text == "" and out.read_text().startswith("# ")


def test_byte_identical_reruns(capsys, tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"{k}.csv"
        run(capsys, "density", "--config", CONFIGS / "circle.json", "--grid", "0:2:9", "--out", p)
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_malformed_json(capsys, tmp_path):
    p = write(tmp_path, '{\n  "input": {\n    "laurent": [\n}')
    code, _, err = run(capsys, "fk-det", "--config", p)
    assert code == 2 and "ConfigParseError" in err and "line 4" in err


def test_bad_field(capsys, tmp_path):
    p = write(tmp_path, {"input": {"laurent": {"d": 1, "terms": [{"exponent": [1, 0], "block": [[1]]}]}}})
    code, _, err = run(capsys, "fk-det", "--config", p)
    assert code == 2 and "input.laurent.terms[0].exponent" in err


def test_two_inputs_rejected(capsys, tmp_path):
    p = write(tmp_path, {"input": {"laurent": {}, "cusp": {}}})
    code, _, err = run(capsys, "fk-det", "--config", p)
    assert code == 2 and "exactly one input" in err


def test_wrong_input_kind(capsys):
    code, _, err = run(capsys, "fk-det", "--config", CONFIGS / "n3k1.json")
    assert code == 2 and "field 'input'" in err


def test_unknown_subcommand(capsys):
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and "UnknownSubcommand" in err


def test_bad_grid(capsys):
    code, _, err = run(capsys, "density", "--config", CONFIGS / "circle.json", "--grid", "0:2")
    assert code == 2 and "--grid" in err


def test_compute_error(capsys, tmp_path):
    p = write(tmp_path, {"input": {"laurent": {"d": 1, "terms": []}}})
    code, _, err = run(capsys, "fk-det", "--config", p)
    assert code == 3 and "ComputeError: IdenticallySingular" in err


def test_compute_error_from_model(capsys, tmp_path):
    p = write(tmp_path, {"input": {"cusp": {"n": 4, "cross_sections": [1], "core_volume": 1}}})
    code, _, err = run(capsys, "cusp-volumes", "--config", p)
    assert code == 3 and "NonOddDimension" in err


def test_verify_subset(capsys, tmp_path):
    p = write(tmp_path, {"params": {"only": [1, 2, 3, 12]}, "seed": 5})
    code, out, err = run(capsys, "verify", "--config", p)
    meta, rows = parse(out)
    assert code == 0 and meta["seed"] == 5
    assert [r["criterion"] for r in rows] == ["1", "2", "3", "12"]
    assert err.count("[PASS]") == 4
