import math
from dataclasses import replace

import pytest

from siif_pdn.errors import CatalogError, ValidationError
from siif_pdn.platform import (BUILTIN_APPS, DECAP_CATALOG, DecapKind, DecapLocation,
                               MaterialProperties, PlatformFeatures, TopologyKind,
                               builtin_application, decap_stages_for, validate,
                               validate_application, validate_materials)


def test_defaults_match_feature_table():
    f = validate(PlatformFeatures())
    assert (f.wafer_diameter_mm, f.wafer_area_mm2) == (300, 70685)
    assert f.inter_dielet_pitch_um == 100
    assert (f.pillar_diameter_um, f.pillar_height_um, f.pillar_pitch_um) == (5, 5, 10)
    assert (f.pin_diameter_mm, f.pin_height_mm, f.pin_pitch_mm) == (1.5, 20, 3)
    assert (f.twv_diameter_um, f.twv_height_um, f.twv_pitch_um) == (100, 500, 200)
    assert (f.interconnect_width_um, f.interconnect_thickness_um, f.interconnect_pitch_um) == (2, 2, 4)
    assert f.interconnect_layers == 4
    assert (f.bga_diameter_um, f.bga_height_um) == (300, 200)


def test_five_interconnect_layers_names_field():
    with pytest.raises(ValidationError) as exc:
        validate(replace(PlatformFeatures(), interconnect_layers=5))
    assert "interconnect_layers" in exc.value.fields


def test_area_inconsistent_with_diameter():
    # pi * 150^2 = 70,686 mm^2, far from 60,000
    assert abs(math.pi * 150**2 - 70686) < 1
    with pytest.raises(ValidationError) as exc:
        validate(replace(PlatformFeatures(), wafer_area_mm2=60000))
    assert "wafer_area_mm2" in exc.value.fields


def test_validation_collects_every_violation():
    bad = replace(PlatformFeatures(), interconnect_layers=1, pillar_pitch_um=-1, twv_height_um=900)
    with pytest.raises(ValidationError) as exc:
        validate(bad)
    assert {"interconnect_layers", "pillar_pitch_um", "twv_height_um"} <= set(exc.value.fields)


def test_materials():
    assert MaterialProperties().cu_resistivity == 1.68e-8
    with pytest.raises(ValidationError):
        validate_materials(MaterialProperties(cu_resistivity=0.0))


@pytest.mark.parametrize("name, values", [
    ("LOIHI", (60, 0.085, 1.0, 0.085, 0.032, 1.26)),
    ("EPYC", (85, 25, 1.0, 25, 3, 0.61)),
    ("TPU", (82, 40, 1.8, 22.22, 0.7, 6)),
])
def test_builtin_applications(name, values):
    d = builtin_application(name.lower()).dielet
    assert (d.area_mm2, d.tdp_w, d.supply_voltage_v, d.current_a, d.frequency_ghz,
            d.throughput_tflops) == values


def test_builtin_power_consistency():
    for name in BUILTIN_APPS:
        app = validate_application(builtin_application(name))
        d = app.dielet
        assert 0.9 <= d.tdp_w / (d.supply_voltage_v * d.current_a) <= 1.1
        assert app.input_voltage_v == 48 and app.intermediate_voltage_v == 12


def test_unknown_application():
    with pytest.raises(CatalogError):
        builtin_application("H100")


def test_comm_adder_folds_into_tdp():
    d = replace(builtin_application("EPYC").dielet, comm_power_adder_w=2.0)
    assert d.effective_tdp_w == 27.0
    assert d.load_current_a == 27.0


def test_dielet_area_bound():
    app = builtin_application("TPU")
    with pytest.raises(ValidationError) as exc:
        validate_application(replace(app, dielet=replace(app.dielet, area_mm2=150.0)))
    assert exc.value.fields == ["area_mm2"]


@pytest.mark.parametrize("kind, expected", [
    (TopologyKind.PT, {DecapLocation.WAFER_TOPSIDE, DecapLocation.UD_INTERNAL, DecapLocation.FD_INTERNAL}),
    (TopologyKind.BT1, {DecapLocation.PCB, DecapLocation.WAFER_BACKSIDE, DecapLocation.WAFER_TOPSIDE}),
    (TopologyKind.BT3, {DecapLocation.PCB, DecapLocation.WAFER_BACKSIDE, DecapLocation.WAFER_TOPSIDE}),
    (TopologyKind.BT2_8, {DecapLocation.PCB, DecapLocation.WAFER_TOPSIDE, DecapLocation.UD_INTERNAL}),
    (TopologyKind.BT2_24, {DecapLocation.PCB, DecapLocation.WAFER_TOPSIDE, DecapLocation.UD_INTERNAL}),
])
def test_decap_stage_sets(kind, expected):
    stages = decap_stages_for(kind)
    assert len(stages) == 3
    assert {s.location for s in stages} == expected


def test_backside_ceramic_stage():
    stage = next(s for s in decap_stages_for("bt1") if s.location is DecapLocation.WAFER_BACKSIDE)
    assert stage.kind is DecapKind.CERAMIC
    assert stage.density_range_nf_mm2 == (8800, 40000)


def test_catalog_ranges_ordered():
    for stage in DECAP_CATALOG.values():
        for rng in (stage.density_range_nf_mm2, stage.esl_range_nh,
                    stage.esr_range_mohm or stage.rc_range_ns):
            assert 0 <= rng[0] <= rng[1]


def test_topology_parse():
    assert TopologyKind.parse("bt2_8") is TopologyKind.BT2_8
    assert TopologyKind.parse(" Pt ") is TopologyKind.PT
    with pytest.raises(CatalogError):
        TopologyKind.parse("bt4")
