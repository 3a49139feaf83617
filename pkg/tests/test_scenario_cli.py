import copy
import json

import numpy as np
import pytest

from warpcheck.cli import COMMANDS, main, run
from warpcheck.errors import SchemaError
from warpcheck.scenario import bundled, bundled_dir, bundled_names, from_dict, load_scenario

SUSPENSION = json.loads((bundled_dir() / "spherical-suspension.json").read_text())

TRUTH_TABLE = {
    "spherical-suspension": ("Thm6_iff", "RCD(2,3)"),
    "euclidean-cone": ("Thm6_iff", "RCD(0,3)"),
    "cartesian-product": ("Thm6_iff", "RCD(0,2)"),
    "elliptic-cone": ("Thm6_iff", "RCD(-2,3)"),
    "hyperbolic-cone": ("Thm6_iff", "RCD(-2,3)"),
    "parabolic-cone": ("Thm6_iff", "RCD(-2,3)"),
    "example-1.2": ("Thm2_item4", "RCD(-2,4)"),
    "concavity-violating": ("Thm1_sufficient", "Inconclusive"),
    "boundary-violating": ("Thm1_sufficient", "Inconclusive"),
    "under-attested": ("Thm1_sufficient", "Inconclusive"),
    "affine-non-model": ("Thm6_iff", "RCD(2,3)"),
    "kf-negative-necessity": ("Thm2_item4", "RCD(-2,3)"),
}


# schema -------------------------------------------------------------------

def test_missing_field_path():
    data = copy.deepcopy(SUSPENSION)
    del data["K"]
    with pytest.raises(SchemaError) as exc:
        from_dict(data)
    assert exc.value.path == "$.K"


def test_wrong_type_path():
    data = copy.deepcopy(SUSPENSION)
    data["fiber"]["rcd"]["N"] = "two"
    with pytest.raises(SchemaError) as exc:
        from_dict(data)
    assert exc.value.path.startswith("$.fiber")


def test_interval_order_checked():
    data = copy.deepcopy(SUSPENSION)
    data["base"]["b"] = -1.0
    with pytest.raises(SchemaError) as exc:
        from_dict(data)
    assert exc.value.path == "$.base.b"


def test_negative_samples_path(tmp_path):
    (tmp_path / "w.csv").write_text("r,f\n0,0\n1,-0.5\n2,0\n")
    data = copy.deepcopy(SUSPENSION)
    data["warp"] = {"samples": "w.csv"}
    with pytest.raises(SchemaError) as exc:
        from_dict(data, tmp_path)
    assert exc.value.path == "$.warp.samples"


def test_sampled_warp_loads(tmp_path):
    r = np.linspace(0, np.pi, 65)
    (tmp_path / "w.csv").write_text("r,f\n" + "".join(f"{a},{b}\n" for a, b in zip(r, np.sin(r))))
    data = copy.deepcopy(SUSPENSION)
    data["warp"] = {"samples": "w.csv"}
    (tmp_path / "s.json").write_text(json.dumps(data))
    s = load_scenario(tmp_path / "s.json")
    assert s.warp_function().is_sampled


def test_invalid_json(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(SchemaError) as exc:
        load_scenario(tmp_path / "bad.json")
    assert exc.value.path == "$"


@pytest.mark.parametrize("name", ["spherical-suspension", "euclidean-cone", "cartesian-product",
                                  "elliptic-cone", "hyperbolic-cone", "parabolic-cone"])
def test_model_scenarios_load(name):
    s = bundled(name)
    W = s.product()
    assert W.f.is_catalog and s.expected is not None


def test_grid_scale():
    s = bundled("spherical-suspension")
    assert s.scaled_grid(0.5)["base_n"] == 200
    assert s.scaled_grid(1e-3)["fiber_n"] == 16


def test_twelve_bundled_scenarios():
    assert sorted(bundled_names()) == sorted(TRUTH_TABLE)


# verdicts -----------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(TRUTH_TABLE))
def test_verdict_truth_table(name):
    res = run("classify", bundled(name), 0).results["classify.verdict"]
    params = res["parameters"]
    assert (params["route"], params["conclusion"]) == TRUTH_TABLE[name]
    assert res["pass"]


# run ----------------------------------------------------------------------

def test_run_all_on_suspension(tmp_path):
    rep = run("all", bundled("spherical-suspension"), 42, tmp_path, grid_scale=0.5)
    assert rep.passed and not rep.errors, (rep.errors, [k for k, r in rep.results.items() if not r["pass"]])
    data = json.loads((tmp_path / "spherical-suspension-all.json").read_text())
    assert data["schema"] == "1" and data["seed"] == 42 and data["passed"]
    assert {k.split(".")[0] for k in data["results"]} <= set(COMMANDS)
    for name in data["artifacts"]:
        assert (tmp_path / name).is_file()


def test_run_is_reproducible():
    s = bundled("euclidean-cone")
    a = run("distance", s, 3).to_json()
    assert a == run("distance", s, 3).to_json()
    assert a != run("distance", s, 4).to_json()


def test_spectrum_on_cartesian_product(tmp_path):
    rep = run("spectrum", bundled("cartesian-product"), 0, tmp_path)
    assert rep.passed, rep.results
    rows = (tmp_path / "cartesian-product-spectrum.csv").read_text().splitlines()
    assert rows[0] == "k,laplacian,schrodinger"
    vals = [float(r.split(",")[1]) for r in rows[1:]]
    assert abs(vals[0]) < 1e-10 and vals == sorted(vals)


def test_unknown_command():
    with pytest.raises(ValueError):
        run("nope", bundled("euclidean-cone"))


def test_failing_margin_gives_exit_one():
    rep = run("check", bundled("concavity-violating"), 0)
    assert not rep.passed and rep.exit_code == 1


# main ---------------------------------------------------------------------

def test_main_exit_zero(tmp_path, capsys):
    code = main(["classify", "--scenario", "euclidean-cone", "--out", str(tmp_path)])
    assert code == 0
    assert "PASS classify.verdict" in capsys.readouterr().out
    assert (tmp_path / "euclidean-cone-classify.json").is_file()


def test_main_exit_one(tmp_path):
    assert main(["check", "--scenario", "concavity-violating", "--out", str(tmp_path)]) == 1


def test_main_bad_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"name": "x"}))
    assert main(["check", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    report = json.loads((tmp_path / "bad-check.json").read_text())
    assert report["schema"] == "1" and report["errors"]["load"]["type"] == "SchemaError"
    assert "error:" in capsys.readouterr().err


def test_main_rejects_bad_grid_scale(tmp_path):
    with pytest.raises(SystemExit):
        main(["check", "--scenario", "euclidean-cone", "--grid-scale", "0", "--out", str(tmp_path)])


def test_timestamps_opt_in(tmp_path):
    main(["classify", "--scenario", "euclidean-cone", "--out", str(tmp_path)])
    assert "timestamps" not in (tmp_path / "euclidean-cone-classify.json").read_text()
    main(["classify", "--scenario", "euclidean-cone", "--out", str(tmp_path), "--timestamps"])
    assert "timestamps" in (tmp_path / "euclidean-cone-classify.json").read_text()
