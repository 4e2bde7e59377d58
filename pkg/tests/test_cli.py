import json

import numpy as np
import pytest

from levyepi.cli import main
from levyepi.engine import read_trajectory_csv
from levyepi.scenario import (
    PRESETS,
    ScenarioError,
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_from_mapping,
    scenario_to_mapping,
)


def test_extinction_preset_values(extinction):
    m = extinction.model
    assert (m.lambda_h, m.b, m.beta, m.mu_h, m.rho0, m.rho1) == (0.5, 3, 0.15, 0.8, 0.8, 0.02)
    assert (m.lambda_m, m.beta_m, m.mu_m) == (0.6, 0.55, 0.9)
    assert extinction.noise.sigma == (0.269, 0.25, 0.25, 0.13)
    assert extinction.jumps.atoms[0].xi == (-0.75, 0.8, -0.9, 0.85)
    assert tuple(extinction.init) == (0.2, 0.1, 0.3, 0.4)


def test_persistence_preset_values(persistence):
    m = persistence.model
    assert (m.lambda_h, m.b, m.beta, m.rho1, m.mu_m) == (0.85, 7, 0.65, 0.25, 0.88)
    assert persistence.noise.sigma == (0.269, 0.25, 0.245, 0.14)
    assert persistence.jumps.atoms[0].xi == (-0.75, 0.78, -0.9, 0.85)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip(tmp_path, name):
    path = tmp_path / "s.txt"
    save_scenario(PRESETS[name], path)
    assert load_scenario(path) == PRESETS[name]
    assert scenario_from_mapping(scenario_to_mapping(PRESETS[name])) == PRESETS[name]


def _text(**override):
    items = scenario_to_mapping(PRESETS["table1-extinction"])
    items.update(override)
    return "\n".join(f"{k} = {v}" for k, v in items.items())


def test_jump_below_minus_one_names_a2():
    with pytest.raises(ScenarioError, match="A2.*jumps.atom.0.xi2"):
        parse_scenario(_text(**{"jumps.atom.0.xi2": "-1.2"}))


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ScenarioError, match="line 3"):
        parse_scenario("name = x\np = 2.5\nmodel.bogus = 1\n")
    with pytest.raises(ScenarioError, match="line 2.*expected 'key = value'"):
        parse_scenario("name = x\nnonsense\n")
    with pytest.raises(ScenarioError, match="model.mu_h"):
        parse_scenario(_text(**{"model.mu_h": "-0.1"}))
    with pytest.raises(ScenarioError, match="unknown preset|no preset"):
        load_scenario("no-such-preset")


def test_thresholds_exit_codes(capsys):
    assert main(["thresholds", "--preset", "table1-extinction"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "ExtinctionCertified"
    assert report["metadata"]["model.lambda_h"] == "0.5"
    assert main(["thresholds", "--preset", "table1-persistence"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["r0_tilde"] > 1


def test_thresholds_indeterminate(tmp_path, capsys):
    path = tmp_path / "s.txt"
    path.write_text(_text(**{"noise.sigma1": "1.2"}))
    assert main(["thresholds", "--scenario", str(path)]) == 2


def test_invalid_scenario_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("name = x\nmodel.lambda_h = abc\n")
    assert main(["thresholds", "--scenario", str(path)]) == 64
    assert "line 2" in capsys.readouterr().err


def test_bad_flags_are_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["thresholds", "--bogus"])
    assert info.value.code == 64
    assert main(["simulate", "--dt", "0"]) == 64


def test_bad_worker_env(monkeypatch, capsys):
    monkeypatch.setenv("LEVYEPI_WORKERS", "zero")
    assert main(["thresholds"]) == 64


def test_simulate_extinction_csv(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code = main(["simulate", "--preset", "table1-extinction", "--seed", "42", "--t-end", "200",
                 "--out", str(out)])
    assert code == 0
    times, states, meta = read_trajectory_csv(out)
    assert times[-1] == 200.0
    assert states[-1, 1] < 1e-2 and states[-1, 3] < 1e-2
    assert meta["seed"] == "42" and meta["sim.seed"] == "42"
    assert (tmp_path / "traj.jumps.csv").exists()


def test_simulate_svg(tmp_path, capsys):
    svg = tmp_path / "out.svg"
    code = main(["simulate", "--preset", "table1-persistence", "--t-end", "20",
                 "--out", str(tmp_path / "t.csv"), "--svg", str(svg)])
    assert code == 0
    text = svg.read_text()
    assert text.count('class="panel"') == 4
    assert "<metadata>" in text and "table1-persistence" in text


def test_ensemble_outputs(tmp_path, capsys):
    out = tmp_path / "e.json"
    csv = tmp_path / "e.csv"
    code = main(["ensemble", "--preset", "table1-extinction", "--paths", "3", "--t-end", "10",
                 "--seed", "5", "--out", str(out), "--paths-csv", str(csv)])
    assert code == 0
    summary = json.loads(out.read_text())
    assert summary["n_paths"] == 3
    meta = summary["metadata"]
    assert meta["seed"] == 5 and meta["t_end"] == 10.0 and meta["version"]
    assert len(csv.read_text().splitlines()) == 4


def test_verify_tables(capsys):
    assert main(["verify", "--target", "tables", "--preset", "table1-extinction"]) == 0
    result = json.loads(capsys.readouterr().out)
    by_name = {r["check"]: r for r in result["checks"]}
    assert by_name["m1"]["passed"] and by_name["delta_p"]["passed"]
    assert by_name["frak_c"]["known_discrepancy"] and not by_name["frak_c"]["passed"]


def test_verify_comparison_small(capsys):
    code = main(["verify", "--target", "comparison", "--preset", "table1-extinction",
                 "--paths", "3", "--t-end", "10"])
    assert code == 0


def test_verify_aux_limits_noiseless(tmp_path, capsys):
    path = tmp_path / "quiet.txt"
    items = scenario_to_mapping(PRESETS["table1-extinction"])
    items = {k: v for k, v in items.items() if not k.startswith(("noise.", "jumps."))}
    path.write_text("\n".join(f"{k} = {v}" for k, v in items.items()))
    code = main(["verify", "--target", "lemma2", "--scenario", str(path), "--paths", "1",
                 "--t-end", "500", "--dt", "0.01"])
    result = json.loads(capsys.readouterr().out)
    assert code == 0
    values = {r["check"]: r for r in result["checks"]}
    assert values["psi_mean"]["value"] == pytest.approx(0.625, rel=2e-3)
    assert values["psi_square_mean"]["value"] == pytest.approx(0.625 ** 2, rel=5e-3)
    assert np.isfinite(values["psi_hat_mean"]["value"])
