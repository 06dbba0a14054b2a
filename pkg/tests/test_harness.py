import csv
import io
import json
import math

import numpy as np
import pytest

from opcalc import harness
from opcalc.errors import ConfigInvalid, MatrixFileMissing
from opcalc.linalg import eig_oracle, write_matrix


def write_config(tmp_path, doc, matrices):
    for name, m in matrices.items():
        write_matrix(tmp_path / name, m)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def zero_scenario(**extra):
    doc = {
        "id": "zero",
        "generator": {"dim": 3, "T": 1.0,
                      "terms": [{"coef": {"kind": "sin"}, "matrix_file": "Z.mat"}]},
        "times": [[0.5, 0.0, -0.5], [0.9, -0.3, 0.2]],
        "checks": ["eq4_chain"],
    }
    doc.update(extra)
    return doc


def rows_by_check(rows):
    out = {}
    for row in rows:
        out.setdefault(row.check, []).append(row)
    return out


# --- config parsing --------------------------------------------------------

def test_zero_generator_scenario(tmp_path):
    path = write_config(tmp_path, zero_scenario(), {"Z.mat": np.zeros((3, 3))})
    summary = harness.run_config(path, tmp_path / "out")
    assert summary["exit_code"] == 0
    assert summary["checks"]["eq4_chain"]["pass"] == 2
    assert summary["checks"]["eq4_chain"]["max_residual"] < 1e-12


def test_missing_dim_names_path(tmp_path):
    doc = zero_scenario()
    del doc["generator"]["dim"]
    path = write_config(tmp_path, doc, {"Z.mat": np.zeros((3, 3))})
    with pytest.raises(ConfigInvalid) as info:
        harness.load_config(path)
    assert info.value.path == "/generator/dim"
    assert "/generator/dim" in str(info.value)


@pytest.mark.parametrize("mutate, pointer", [
    (lambda d: d.update(checks=["eq99"]), "/checks/0"),
    (lambda d: d.update(quadrature_nodes=8), "/quadrature_nodes"),
    (lambda d: d["times"].append([0.1, 0.2]), "/times/2"),
    (lambda d: d.update(times=[[2.0, 0.0, 0.0]]), "/times/0"),
    (lambda d: d["generator"].update(dim=4), "/generator/terms/0/matrix_file"),
    (lambda d: d.update(kappa_policy={"fixed": "x"}), "/kappa_policy/fixed"),
])
def test_schema_violations(tmp_path, mutate, pointer):
    doc = zero_scenario()
    mutate(doc)
    path = write_config(tmp_path, doc, {"Z.mat": np.zeros((3, 3))})
    with pytest.raises(ConfigInvalid) as info:
        harness.load_config(path)
    assert info.value.path == pointer


def test_missing_matrix_file(tmp_path):
    path = write_config(tmp_path, zero_scenario(), {})
    with pytest.raises(MatrixFileMissing):
        harness.load_config(path)


def test_duplicate_ids(tmp_path):
    path = write_config(tmp_path, {"scenarios": [zero_scenario(), zero_scenario()]},
                        {"Z.mat": np.zeros((3, 3))})
    with pytest.raises(ConfigInvalid):
        harness.load_config(path)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ConfigInvalid):
        harness.load_config(str(path))


def test_policies_parsed(tmp_path):
    doc = zero_scenario(kappa_policy={"fixed": [0, 2]}, K_policy={"poly": [3, [0.5, 0]]},
                        contour={"kind": "circle", "center": 1, "radius": 0.5})
    path = write_config(tmp_path, doc, {"Z.mat": np.diag([1.0, 2.0, 3.0])})
    (sc,) = harness.load_config(path)
    assert sc.kappa == 2j
    assert np.allclose(sc.shift_matrix(), np.diag([3.5, 4.0, 4.5]))
    assert sc.contour.radius == 0.5


# --- rows and reports ------------------------------------------------------

def test_bundled_rotation_wrap():
    (sc,) = harness.load_config(harness.bundled_config("rotation_wrap"))
    rows = rows_by_check(harness.run_scenario(sc))
    eq4 = rows["eq4_chain"]
    assert any(r.status == "wrap" for r in eq4)
    assert all(r.status in ("wrap", "pass") for r in eq4)
    for r in eq4:
        if r.status == "wrap":
            assert "2*pi*i*" in r.diagnosis and "1" in r.diagnosis
            assert abs(r.residual - 2 * math.pi) < 1e-6
    integral = rows["integral_repr"]
    assert any(r.status == "wrap" for r in integral)
    assert all(r.status == "pass" for r in rows["roundtrip"] + rows["semigroup"])


def test_strict_wrap_fails():
    (sc,) = harness.load_config(harness.bundled_config("rotation_wrap"))
    sc.checks = ["eq4_chain"]
    rows = harness.run_scenario(sc, strict_wrap=True)
    assert any(r.status == "fail" for r in rows)
    assert harness.summarize(rows)["exit_code"] == 1


def test_status_matches_threshold():
    row = harness.ReportRow("x", "roundtrip", residual=1e-3, threshold=1e-2)
    assert harness._graded(row).status == "pass"
    row = harness.ReportRow("x", "roundtrip", residual=1e-1, threshold=1e-2)
    assert harness._graded(row).status == "fail"


def test_csv_layout(tmp_path):
    path = write_config(tmp_path, zero_scenario(), {"Z.mat": np.zeros((3, 3))})
    harness.run_config(path, tmp_path / "out")
    text = (tmp_path / "out" / "report.csv").read_text()
    reader = list(csv.reader(io.StringIO(text)))
    assert reader[0][:13] == ["id", "check", "t", "r", "s", "kappa_re", "kappa_im", "K_norm",
                              "N", "h", "residual", "threshold", "status"]
    assert all(len(r) == len(harness.CSV_COLUMNS) for r in reader)
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["rows"] == 2


def test_skipped_rows_keep_running():
    # U(0.5, -0.5) = -1 sits on the cut, so kappa = 0 logarithms are unavailable
    sc = harness.Scenario(
        id="s", generator=harness.GeneratorSpec(
            1, ((harness.Coefficient.const(1), [[1j * math.pi]]),)),
        times=[(0.5, -0.5, 0.0), (0.2, 0.0, -0.1)], checks=["eq5_commuting", "eq4_chain"])
    rows = harness.run_scenario(sc)
    statuses = [r.status for r in rows]
    assert statuses[:2] == ["skipped(no second_generator)"] * 2
    assert statuses[2].startswith("skipped(BranchCutIntersection)")
    assert statuses[3] == "pass"


# --- ensembles -------------------------------------------------------------

def test_ensemble_deterministic(tmp_path):
    a = harness.write_ensemble(tmp_path / "a", *harness.generate_ensemble(42, 2, 3))
    b = harness.write_ensemble(tmp_path / "b", *harness.generate_ensemble(42, 2, 3))
    for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert open(a).read() == open(b).read()


def test_ensemble_profile_rhp():
    _, matrices = harness.generate_ensemble(7, 3, 4, "right-half-plane")
    for m in matrices.values():
        assert np.all(eig_oracle(m).values.real > 0)


def test_ensemble_commuting():
    scenarios, matrices = harness.generate_ensemble(11, 2, 5, "rotational")
    for sc in scenarios:
        names = [t["matrix_file"] for t in sc["generator"]["terms"]]
        names += [t["matrix_file"] for t in sc["second_generator"]["terms"]]
        ms = [matrices[n] for n in names]
        for a in ms:
            for b in ms:
                assert np.linalg.norm(a @ b - b @ a) < 1e-12 * (1 + np.linalg.norm(a) * np.linalg.norm(b))


def test_ensemble_scalar_runs(tmp_path):
    path = harness.write_ensemble(tmp_path, *harness.generate_ensemble(5, 2, 1))
    summary = harness.run_config(path, tmp_path / "out")
    assert summary["exit_code"] == 0
    assert summary["checks"]["eq4_chain"]["max_residual"] < 1e-12


def test_ensemble_rejects_bad_args():
    with pytest.raises(ValueError):
        harness.generate_ensemble(1, 1, 17)
    with pytest.raises(ValueError):
        harness.generate_ensemble(1, 1, 2, "elliptic")


@pytest.mark.parametrize("profile", harness.PROFILES)
def test_ensemble_profiles_have_no_failures(tmp_path, profile):
    path = harness.write_ensemble(tmp_path, *harness.generate_ensemble(42, 2, 3, profile))
    summary = harness.run_config(path, tmp_path / "out")
    assert summary["exit_code"] == 0


# --- studies ---------------------------------------------------------------

def _scenario(tmp_path, seed=9, dim=3):
    path = harness.write_ensemble(tmp_path, *harness.generate_ensemble(seed, 1, dim))
    return harness.load_config(path)[0]


def test_study_fd_step_slope(tmp_path):
    sc = _scenario(tmp_path)
    rep = harness.convergence_study(sc, "fd_step", [1e-2, 5e-3, 2.5e-3])
    assert 1.9 <= rep.slope <= 2.1
    assert "slope," in rep.table()


def test_study_nodes_monotone(tmp_path):
    sc = _scenario(tmp_path)
    rep = harness.convergence_study(sc, "nodes", [64, 128, 256])
    floor = 1e-14
    assert all(b <= max(a, floor) for a, b in zip(rep.residuals, rep.residuals[1:]))
    assert len(rep.ratios) == 2


def test_study_single_value(tmp_path):
    rep = harness.convergence_study(_scenario(tmp_path), "fd_step", [1e-3])
    assert rep.slope is None
    assert "slope,undefined" in rep.table()


def test_study_rejects_non_monotone(tmp_path):
    with pytest.raises(ValueError):
        harness.convergence_study(_scenario(tmp_path), "nodes", [64, 32, 128])
