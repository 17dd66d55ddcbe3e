import json

import numpy as np
import pytest

from uniprice.cli import COLUMNS, EXIT_CONFIG, EXIT_OK, main, read_csv
from uniprice.errors import ConfigError
from uniprice.scenario import ScenarioSpec, generate_population, load_spec, spec_from_dict, spec_to_dict

BASE = {
    "name": "tiny",
    "seed": 11,
    "market": {"population": 4, "caps_per_agent": [-0.2, -0.5], "wholesale": [0.5, 1.0]},
    "type_bounds": {"a": [0.8, 1.2], "b": [-1.5, -0.75], "beta": [-2.0, -0.5]},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(BASE))
    return path


def test_spec_round_trip():
    spec = spec_from_dict(BASE)
    np.testing.assert_allclose(spec.config.caps, [-0.8, -2.0])
    again = spec_from_dict(spec_to_dict(spec))
    assert again.digest() == spec.digest()


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.pop("seed"), "seed"),
    (lambda d: d["market"].pop("wholesale"), "market.wholesale"),
    (lambda d: d["market"].update(horizon=3), "market.horizon"),
    (lambda d: d["type_bounds"].update(a=[0.0, 1.0]), "type_bounds.a"),
    (lambda d: d["type_bounds"].update(zeta=[0, 1]), "type_bounds"),
    (lambda d: d["market"].update(population="many"), "market.population"),
])
def test_config_errors_name_field(mutate, field):
    data = json.loads(json.dumps(BASE))
    mutate(data)
    with pytest.raises(ConfigError) as info:
        spec_from_dict(data)
    assert info.value.field == field


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "seed": 1,\n  "market": [\n')
    with pytest.raises(ConfigError, match="line"):
        load_spec(path)


def test_populations_are_nested():
    spec = spec_from_dict(BASE)
    small = generate_population(spec)
    big = generate_population(spec.with_population(9))
    assert len(big) == 9
    np.testing.assert_array_equal(big.betas[:4], small.betas)
    np.testing.assert_array_equal(big.x0[:4], small.x0)
    np.testing.assert_allclose(spec.with_population(9).config.caps, [-1.8, -4.5])


def test_population_inside_bounds():
    spec = spec_from_dict(BASE)
    generate_population(spec.with_population(50)).validate(spec.config.type_bounds)


@pytest.mark.parametrize("command, kind", [
    ("simulate", "trajectory"), ("respond", "response"), ("planner", "market"), ("clear", "market"),
])
def test_cli_writes_csv_and_sidecar(tmp_path, config_path, command, kind):
    out = tmp_path / f"{command}.csv"
    assert main([command, "--config", str(config_path), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == COLUMNS[kind]
    record = json.loads(out.with_name(out.name + ".run.json").read_text())
    assert record["scenario_name"] == "tiny"
    assert record["input_digest"] == load_spec(config_path).digest()


def test_cli_csv_round_trips_floats(tmp_path, config_path):
    from uniprice.mechanism import clear
    out = tmp_path / "clear.csv"
    main(["clear", "--config", str(config_path), "--out", str(out)])
    spec = load_spec(config_path)
    res = clear(generate_population(spec), spec.config)
    prices = [float(r["price"]) for r in read_csv(out)]
    assert prices == res.prices.tolist()
    alloc = read_csv(tmp_path / "clear_allocation.csv")
    assert len(alloc) == 4 * 2


def test_cli_deterministic(tmp_path, config_path):
    for name in ("a.csv", "b.csv"):
        main(["ic-sweep", "--config", str(config_path), "--sizes", "4,8", "--budget", "10",
              "--agents", "1", "--out", str(tmp_path / name)])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cli_seed_override_changes_output(tmp_path, config_path):
    main(["simulate", "--config", str(config_path), "--out", str(tmp_path / "a.csv")])
    main(["simulate", "--config", str(config_path), "--seed", "12", "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


def test_cli_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["clear", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert "line" in capsys.readouterr().err
    missing = tmp_path / "nope.json"
    assert main(["clear", "--config", str(missing)]) == EXIT_CONFIG


def test_cli_verify_passes(config_path, capsys):
    assert main(["verify", "--config", str(config_path)]) == EXIT_OK
    assert "FAIL" not in capsys.readouterr().out


def test_cli_bad_sizes(config_path, tmp_path):
    assert main(["ic-sweep", "--config", str(config_path), "--sizes", "ten",
                 "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
