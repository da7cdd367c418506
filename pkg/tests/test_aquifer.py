import dataclasses

import pytest
import yaml

from gwann.aquifer import (
    ModelConfigError,
    SECONDS_PER_MONTH,
    WellSpec,
    default_model_path,
    load_model,
    model_to_dict,
    save_model,
    validate,
)


def _default_cfg():
    return yaml.safe_load(default_model_path().read_text())


def _write(tmp_path, cfg):
    p = tmp_path / "model.yaml"
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_default_model_parameters(model):
    assert model.transport.porosity_phi == 0.3
    assert model.transport.alpha_L == 40.0
    assert model.transport.alpha_T == 4.0
    assert model.grid.thickness_b == 30.0
    assert model.grid.delta_zeta == model.grid.delta_eta == 100.0
    assert sorted(model.zones.hk_of_zone.values()) == sorted([0.0004, 0.0002, 0.0001, 0.0003, 0.0007])
    assert [s.id for s in model.sources] == ["S1", "S2"]
    assert len(model.wells) == 7
    assert model.schedule.n_periods == 10 and model.schedule.period_length == 6.0
    assert model.n_observations == 35
    assert model.transport.initial_concentration == 0.0


def test_default_model_validates_clean(model):
    assert validate(model) == []


def test_default_zones_all_used(model):
    zones = set(model.zones.zone_of_cell(model.grid).ravel())
    assert zones == {1, 2, 3, 4, 5}


def test_zero_hk_names_zonemap(tmp_path):
    cfg = _default_cfg()
    cfg["zones"]["hk"][3] = 0.0
    with pytest.raises(ModelConfigError) as exc:
        load_model(_write(tmp_path, cfg))
    assert any(v.startswith("ZoneMap") for v in exc.value.violations)


def test_well_outside_grid_names_wellspec(tmp_path):
    cfg = _default_cfg()
    cfg["wells"][0]["cell"] = [50, 2]
    with pytest.raises(ModelConfigError) as exc:
        load_model(_write(tmp_path, cfg))
    assert [v for v in exc.value.violations if v.startswith("WellSpec")]


def test_validate_reports_every_violation(model):
    bad = dataclasses.replace(
        model,
        wells=model.wells[:-1] + (WellSpec("W7", (99, 99)),),
        transport=dataclasses.replace(model.transport, porosity_phi=1.5),
    )
    problems = validate(bad)
    assert len(problems) == 2


def test_observation_beyond_schedule(model):
    sched = dataclasses.replace(model.schedule, observation_times=(12.0, 24.0, 36.0, 48.0, 61.0 * 10))
    problems = validate(dataclasses.replace(model, schedule=sched))
    assert len(problems) == 1 and problems[0].startswith("StressSchedule")


def test_single_head_value_rejected(tmp_path):
    cfg = _default_cfg()
    for b in cfg["boundaries"]:
        b["head"] = 95.0
    with pytest.raises(ModelConfigError) as exc:
        load_model(_write(tmp_path, cfg))
    assert any("BoundaryConditions" in v for v in exc.value.violations)


def test_interior_fixed_head_rejected(tmp_path):
    cfg = _default_cfg()
    cfg["boundaries"][0]["cols"] = [3, 3]
    with pytest.raises(ModelConfigError) as exc:
        load_model(_write(tmp_path, cfg))
    assert any("not on the domain boundary" in v for v in exc.value.violations)


def test_parse_failure(tmp_path):
    p = tmp_path / "broken.yaml"
    p.write_text("grid: [unclosed")
    with pytest.raises(ModelConfigError):
        load_model(p)


def test_missing_section(tmp_path):
    cfg = _default_cfg()
    del cfg["transport"]
    with pytest.raises(ModelConfigError):
        load_model(_write(tmp_path, cfg))


def test_wrong_format_version(tmp_path):
    cfg = _default_cfg()
    cfg["format_version"] = 99
    with pytest.raises(ModelConfigError):
        load_model(_write(tmp_path, cfg))


def test_round_trip(model, tmp_path):
    p = tmp_path / "rt.yaml"
    save_model(model, p)
    again = load_model(p)
    assert again == model
    assert model_to_dict(again) == model_to_dict(model)


def test_schedule_seconds(model):
    edges = model.schedule.period_edges_seconds()
    assert edges[0] == 0 and edges[-1] == pytest.approx(60 * SECONDS_PER_MONTH)
    assert model.schedule.observation_seconds()[-1] == pytest.approx(60 * SECONDS_PER_MONTH)


def test_model_is_immutable(model):
    with pytest.raises(dataclasses.FrozenInstanceError):
        model.name = "other"
