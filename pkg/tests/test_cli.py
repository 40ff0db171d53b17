import json

import pytest

from triobs.cli import EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, EXIT_PARSE, EXIT_REFUSED, REPORT_VERSION, main

from .conftest import CONFIGS, SYSTEMS

EX1 = str(SYSTEMS / "example1.sys")
EX2 = str(SYSTEMS / "example2.sys")
A3 = str(SYSTEMS / "synthetic_a3.sys")


def run(*argv):
    return main([str(a) for a in argv])


def report(out):
    return json.loads((out / "report.json").read_text())


def test_validate(capsys):
    assert run("validate", "--system", EX1) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["states"] == ["x1", "x2", "x3"] and doc["samples"] == 21**3


def test_dump_lie(capsys):
    assert run("dump-lie", "--system", EX1, "--order", 5) == EXIT_OK
    text = capsys.readouterr().out
    assert "3*x3^2" in text and "6*x3" in text


def test_analyze_example1(tmp_path):
    out = tmp_path / "a1"
    assert run("analyze", "--system", EX1, "--config", CONFIGS / "example1_analyze.json", "--out", out) == EXIT_OK
    rep = report(out)
    assert rep["version"] == REPORT_VERSION and rep["command"] == "analyze"
    assert rep["results"]["orders"]["strong_order"] == 5
    assert rep["results"]["injectivity"]["3"]["injective"]
    scan = rep["results"]["lipschitz"]["3"]
    assert not scan["bounded"]
    verdicts = {v["check"]: v for v in rep["verdicts"]}
    assert not verdicts["lipschitz_ratio[3]"]["passed"]
    assert all("evidences" in v for v in rep["verdicts"])
    for name in ("rank_profile.csv", "fiber_pairs.csv", "lipschitz.csv", "metadata.json"):
        assert (out / name).is_file()


def test_analyze_example2(tmp_path):
    out = tmp_path / "a2"
    assert run("analyze", "--system", EX2, "--config", CONFIGS / "example2_analyze.json", "--out", out) == EXIT_OK
    res = report(out)["results"]
    assert res["orders"]["weak_order"] == 4
    assert res["property_a"]["3"]["passed"]
    assert res["injectivity"]["4"]["injective"]


def test_reports_are_byte_identical(tmp_path):
    args = ["analyze", "--system", EX2, "--set", "box.grid=7", "--set", "analysis.fiber_anchors=8"]
    out = tmp_path / "r"
    assert run(*args, "--out", out) == EXIT_OK
    first = {name: (out / name).read_bytes() for name in ("report.json", "rank_profile.csv", "fiber_pairs.csv")}
    assert run(*args, "--out", out) == EXIT_OK
    for name, data in first.items():
        assert (out / name).read_bytes() == data, name


def test_report_carries_config(tmp_path):
    out = tmp_path / "v"
    assert run("analyze", "--system", EX2, "--set", "box.grid=5", "--set", "tolerances.a_tol=1e-5",
               "--set", "analysis.fiber_anchors=4", "--out", out) == EXIT_OK
    rep = report(out)
    assert rep["config"]["tolerances"]["a_tol"] == 1e-5
    assert rep["config"]["box"]["grid"] == [5, 5, 5]
    assert len(rep["config_hash"]) == 16 and rep["system"]["hash"]


def test_parse_errors(tmp_path, capsys):
    bad = tmp_path / "bad.sys"
    bad.write_text("states x1\ninputs u\nf = [x1 +]\ng = [[0]]\nh = x1\n")
    assert run("validate", "--system", bad) == EXIT_PARSE
    assert "parse error" in capsys.readouterr().err
    assert run("validate", "--system", tmp_path / "nope.sys") == EXIT_PARSE
    with pytest.raises(SystemExit) as info:
        run("frobnicate")
    assert info.value.code == 2


def test_config_errors(tmp_path):
    assert run("validate", "--system", EX1, "--set", "box.colour=1") == EXIT_CONFIG
    assert run("validate") == EXIT_CONFIG
    assert run("validate", "--system", EX1, "--config", tmp_path / "none.json") == EXIT_CONFIG
    assert run("transform", "--system", EX1, "--out", tmp_path) == EXIT_CONFIG  # no orders given


def test_transform_and_refusal(tmp_path, capsys):
    out = tmp_path / "t1"
    assert run("transform", "--system", EX1, "--config", CONFIGS / "example1_transform.json", "--out", out) == EXIT_OK
    rep = report(out)
    assert all(rep["results"]["lipschitz"].values())
    assert (out / "form.json").is_file()
    capsys.readouterr()
    code = run("transform", "--system", A3, "--config", CONFIGS / "synthetic_a3_transform.json",
               "--out", tmp_path / "t3")
    assert code == EXIT_REFUSED
    err = capsys.readouterr().err
    witness = json.loads(err.split("witness: ", 1)[1])
    assert witness["dLg"] == pytest.approx(4 * abs(witness["xa"][2]), rel=1e-6)


@pytest.fixture(scope="module")
def observer_form(tmp_path_factory):
    out = tmp_path_factory.mktemp("obs")
    assert run("transform", "--system", EX1, "--config", CONFIGS / "example1_observer.json", "--out", out) == EXIT_OK
    return out / "form.json"


def test_simulate_converges(tmp_path, observer_form):
    out = tmp_path / "s"
    code = run("simulate", "--system", EX1, "--config", CONFIGS / "example1_observer.json", "--form",
               observer_form, "--out", out)
    assert code == EXIT_OK
    obs = report(out)["results"]["observer"]
    assert obs["final_err_z"] < 1e-3
    sweep = json.loads((out / "sweep_summary.json").read_text())
    assert sorted(sweep) == ["exact_start", "gain_20"]
    assert sweep["exact_start"]["peak_err_z"] < 1e-5
    assert (out / "traces.csv").read_text().startswith("t,x1,x2,x3,z1")


def test_simulate_missing_form(tmp_path):
    assert run("simulate", "--system", EX1, "--form", tmp_path / "none.json", "--out", tmp_path) == EXIT_CONFIG
    assert run("simulate", "--system", EX1, "--out", tmp_path) == EXIT_CONFIG


def test_simulate_leaving_box(tmp_path):
    out = tmp_path / "t"
    assert run("transform", "--system", EX1, "--config", CONFIGS / "example1_transform.json", "--out", out) == EXIT_OK
    # x1 = t^2 / 2 leaves [-1, 1] before T = 5
    code = run("simulate", "--system", EX1, "--form", out / "form.json", "--out", tmp_path / "s",
               "--set", "simulation.x0=[0,0,1]", "--set", "simulation.u=-1", "--set", "simulation.T=5")
    assert code == EXIT_DOMAIN
    assert report(tmp_path / "s")["results"]["observer"]["truncated"]


def test_form_for_other_system_rejected(tmp_path):
    out = tmp_path / "t"
    assert run("transform", "--system", EX1, "--config", CONFIGS / "example1_transform.json", "--out", out) == EXIT_OK
    assert run("simulate", "--system", EX2, "--form", out / "form.json", "--out", tmp_path / "s") == EXIT_CONFIG


def test_tangent_sim(tmp_path):
    out = tmp_path / "g"
    assert run("tangent-sim", "--system", EX2, "--config", CONFIGS / "example2_tangent.json", "--out", out) == EXIT_OK
    res = report(out)["results"]
    assert res["trace"]["sup_w"] < 1e-12 and res["trace"]["witness"]
    assert res["infinitesimal_rank"]["rank"] < 3
    assert run("tangent-sim", "--system", EX2, "--out", out) == EXIT_CONFIG  # no v0


def test_modulus(tmp_path):
    out = tmp_path / "m"
    code = run("modulus", "--system", EX1, "--out", out, "--set", "box.grid=[1,1,401]",
               "--set", 'modulus.phi="3*x3^2"', "--set", 'modulus.gamma=["x1","x2","x3^3"]')
    assert code == EXIT_OK
    rows = (out / "modulus.csv").read_text().splitlines()
    assert rows[0] == "s,rho0" and len(rows) == 42
    assert run("modulus", "--system", EX1, "--out", out) == EXIT_CONFIG
