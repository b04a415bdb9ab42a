import csv
import io
import json
import math
import os
import subprocess
import sys
from contextlib import redirect_stdout

import numpy as np
import pytest

from conereg.cli import main
from conereg.morrey import geometric_cone_graph, sample_on_cone_graph


def run(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    return code, json.loads(buf.getvalue()), buf.getvalue()


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


POTENTIAL_LIMITED = {
    "link": {"kind": "circle", "circumference": 4 * math.pi},
    "rho": 1.0,
    "radial_nodes": 256,
    "modes": [1, 2],
    "potential": {"kind": "manufactured", "params": {"a": 0.4, "mode": 1}, "p": 5 / 3},
}


# -- exponent / spectrum / suspension ----------------------------------------

def test_exponent_wide_circle():
    code, doc, _ = run("exponent", "--link", "circle:12.566", "--n", "2", "--p", "inf")
    assert code == 0
    assert doc["nu1"] == pytest.approx(0.5, abs=1e-4) and doc["mu"] == doc["nu1"]
    assert doc["regime"] == "Holder_nu"


def test_exponent_sphere():
    code, doc, _ = run("exponent", "--link", "sphere:2", "--n", "3", "--p", "inf")
    assert code == 0 and doc["nu1"] == 1.0 and doc["regime"] == "LogLipschitz"


def test_exponent_potential_limited():
    _, doc, _ = run("exponent", "--link", "circle:6.2832", "--n", "2", "--p", "2")
    assert doc["mu"] == pytest.approx(0.5)


def test_exponent_errors():
    assert run("exponent", "--link", "sphere:2", "--n", "4")[0] == 2
    link = json.dumps({"kind": "discretized", "n_nodes": 100, "k": 1, "n": 3, "mu": 0.25})
    code, doc, _ = run("exponent", "--link", link)
    assert code != 0 and "DisconnectedLinkError" in doc["error"]


def test_spectrum_json():
    code, doc, _ = run("spectrum", "--link", "sphere:2", "--count", "9")
    assert code == 0
    assert [(g["lambda"], g["nu"], g["multiplicity"]) for g in doc] == [
        (0.0, 0.0, 1), (2.0, 1.0, 3), (6.0, 2.0, 5)]


def test_suspension_check():
    code, doc, _ = run("suspension-check", "--base", "circle:12.566370614359172",
                       "--k", "1", "2", "3")
    assert code == 0 and doc["pass"]
    assert max(c["gap"] for c in doc["checks"]) <= 1e-10
    code, doc, _ = run("suspension-check", "--base", "circle:9.42477796076938", "--k", "2",
                       "--method", "discretized")
    assert code == 0 and doc["checks"][0]["gap"] <= 1e-3


# -- scene subcommands -------------------------------------------------------

def test_dtn_model():
    code, doc, _ = run("dtn", "--radial-nodes", "256")
    assert code == 0
    assert max(doc["relative_error"]) < 0.02
    assert "matrix" not in doc
    _, doc, _ = run("dtn", "--radial-nodes", "16", "--matrix")
    assert np.array(doc["matrix"]).shape == (5, 5)


def test_dtn_scene_file(tmp_path):
    scene = write_json(tmp_path / "scene.json", {
        "link": {"kind": "circle", "circumference": 2 * math.pi}, "rho": 0.5,
        "radial_nodes": 128, "modes": 3, "perturbation": {"Lambda": 0.0, "gamma": 1.0},
        "potential": {"kind": "zero", "params": {}, "p": "inf"}})
    code, doc, _ = run("dtn", "--scene", scene)
    assert code == 0 and doc["eigenvalues"][1] == pytest.approx(2.0, rel=1e-3)
    # a flag overrides the scene file
    _, doc, _ = run("dtn", "--scene", scene, "--rho", "1.0")
    assert doc["eigenvalues"][1] == pytest.approx(1.0, rel=1e-3)


def test_solve_writes_field(tmp_path):
    out = tmp_path / "field.csv"
    code, doc, _ = run("solve", "--radial-nodes", "32", "--trace", "1,0.5,0,0,0",
                       "--field-csv", str(out))
    assert code == 0 and doc["residual"] <= 1e-10
    rows = list(csv.DictReader(open(out)))
    assert list(rows[0]) == ["r", "mode", "value"] and len(rows) == 32 * 5


def test_solve_rejects_small_p():
    code, doc, _ = run("solve", "--potential", '{"kind": "constant", "value": 1, "p": 1}')
    assert code == 2 and "n/2" in doc["error"]


def test_solve_annulus_needs_inner_trace():
    code, _, _ = run("solve", "--inner", "dirichlet", "--r-min-ratio", "0.1")
    assert code == 2
    code, doc, _ = run("solve", "--inner", "dirichlet", "--r-min-ratio", "0.1",
                       "--inner-trace", "1,0,0,0,0", "--trace", "1,0,0,0,0")
    assert code == 0


def test_solve_trace_length_checked():
    assert run("solve", "--trace", "1,2")[0] == 2


def test_monotonicity_model(tmp_path):
    out = tmp_path / "profile.csv"
    code, doc, _ = run("monotonicity", "--trace", "0.3,1,-0.5,0.2,0.7", "--profile-csv", str(out))
    assert code == 0 and doc["model_case"] and doc["max_violation_C0"] <= 1e-8
    rows = list(csv.DictReader(open(out)))
    assert list(rows[0]) == ["rho", "E0", "Eg", "phi"]


def test_monotonicity_bounded_potential():
    code, doc, _ = run("monotonicity", "--trace", "0,1,0,0.5,0",
                       "--potential", '{"kind": "constant", "params": {"value": 1}}')
    assert code == 0 and not doc["model_case"]
    assert math.isfinite(doc["fitted_C"]) and doc["gamma_bar"] == 1.0


# -- holder-fit ----------------------------------------------------------------

def test_holder_fit_from_energies(tmp_path):
    r = np.geomspace(1e-3, 0.2, 12)
    path = tmp_path / "e.csv"
    path.write_text("r,energy\n" + "".join(f"{x:.17g},{x ** -0.6:.17g}\n" for x in r))
    code, doc, _ = run("holder-fit", "--energies", str(path))
    assert code == 0 and doc["alpha_hat"] == pytest.approx(0.7) and doc["regime"] == "power"


def test_holder_fit_from_graph(tmp_path):
    g = geometric_cone_graph(4 * math.pi, 1.0, 1e-4, 120, 64)
    e, v, f = tmp_path / "e.csv", tmp_path / "v.csv", tmp_path / "f.csv"
    g.to_csv(e, v)
    vals = sample_on_cone_graph(g, lambda r, th: r ** 0.5 * np.cos(th / 2))
    f.write_text("id,value\n" + "".join(f"{i},{x:.17g}\n" for i, x in enumerate(vals)))
    code, doc, _ = run("holder-fit", "--edges", str(e), "--vertices", str(v), "--field", str(f),
                       "--center", "0", "--radii", "geom:0.001:0.25:16")
    assert code == 0 and abs(doc["alpha_hat"] - 0.5) <= 0.05


def test_holder_fit_needs_input():
    assert run("holder-fit")[0] == 2


# -- verify --------------------------------------------------------------------

def test_verify_default_cone():
    code, doc, _ = run("verify")
    assert code == 0 and doc["pass"]
    assert doc["stages"]["holder_fit"]["predicted_mu"] == pytest.approx(0.5)
    assert doc["alpha_gap"] <= 0.05


def test_verify_flat_disk():
    code, doc, _ = run("verify", "--link", "circle:6.283185307179586")
    stage = doc["stages"]["holder_fit"]
    assert code == 0
    assert stage["predicted_regime"] == "LogLipschitz" and stage["regime"] == "log_corrected"


def test_verify_perturbed_rate():
    code, doc, _ = run("verify", "--Lambda", "0.1", "--gamma", "0.5", "--skip", "suspension")
    rate = doc["stages"]["dtn"]["rate"]
    assert code == 0 and rate["slope"] >= -0.5 - 0.1
    assert "suspension" not in doc["stages"]


def test_verify_potential_limited_config(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"scene": POTENTIAL_LIMITED, "seed": 3})
    code, doc, _ = run("--config", cfg, "verify")
    stage = doc["stages"]["holder_fit"]
    assert code == 0 and stage["predicted_mu"] == pytest.approx(0.4)
    assert 0.35 <= stage["alpha_hat"] <= 0.45
    assert doc["seed"] == 3


def test_verify_failure_recorded_and_continues(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"tolerances": {"dtn": 1e-12}})
    code, doc, _ = run("--config", cfg, "verify", "--skip", "suspension")
    assert code == 1 and not doc["stages"]["dtn"]["pass"]
    assert doc["stages"]["holder_fit"]["pass"]


def test_verify_stage_error_recorded():
    pot = '{"kind": "constant", "value": 80}'
    code, doc, _ = run("verify", "--potential", pot, "--skip", "suspension")
    assert code == 1
    assert "CoercivityFailure" in doc["stages"]["monotonicity"]["error"]


def test_verify_deterministic():
    a = run("verify", "--seed", "5", "--skip", "suspension")[2]
    b = run("verify", "--seed", "5", "--skip", "suspension")[2]
    assert a == b


def test_config_unknown_key(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"bogus": 1})
    code, doc, _ = run("--config", cfg, "exponent")
    assert code == 2 and "bogus" in doc["error"]


def test_config_flag_override(tmp_path):
    cfg = write_json(tmp_path / "cfg.json", {"link": "sphere:2", "p": "inf"})
    assert run("--config", cfg, "exponent")[1]["regime"] == "LogLipschitz"
    assert run("--config", cfg, "exponent", "--link", "circle:12.566")[1]["regime"] == "Holder_nu"


def test_console_script_with_thread_cap():
    env = dict(os.environ, CONEREG_THREADS="1")
    res = subprocess.run([sys.executable, "-m", "conereg.cli", "exponent", "--link", "sphere:3"],
                         capture_output=True, text=True, env=env, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["nu1"] == 1.0
