import pytest
from hypothesis import given, strategies as st

from helpers import base_designs
from syndcim.ppa import UnsupportedPrecision, evaluate, objectives, sweep_dimensions, trend_csv
from syndcim.spec_model import BF16, FP8, INT4, INT8, ActivityProfile, MacroSpec


@pytest.fixture(scope="module")
def design(lib):
    return base_designs(lib, 64, 64, 1, (INT4, INT8, FP8, BF16), freq=2e8, limit=1)[0]


def test_summary_identities(design):
    s = evaluate(design, INT8)
    assert s.power_mw == pytest.approx(s.dynamic_mw + s.leakage_mw)
    assert s.energy_fj_per_op == pytest.approx(sum(s.breakdown.values()))
    assert s.macs_per_op == 64 * 64 / 8
    assert s.tops == pytest.approx(2 * s.macs_per_op * 2e8 / 8 / 1e12)
    assert s.tops_per_w == pytest.approx(s.tops / (s.power_mw / 1000))
    assert s.tops_1b1b == pytest.approx(s.tops * 8 * 8)
    assert s.energy_fj_per_mac == pytest.approx(s.energy_fj_per_op / s.macs_per_op)


def test_float_pays_for_alignment(design):
    fp, i8 = evaluate(design, FP8), evaluate(design, INT8)
    assert "fp_int_align" in fp.breakdown and "fp_int_align" not in i8.breakdown
    assert fp.area_um2 > i8.area_um2
    assert 1.05 <= evaluate(design, FP8).power_mw / evaluate(design, INT4).power_mw <= 1.15
    assert 1.12 <= evaluate(design, BF16).power_mw / i8.power_mw <= 1.28


def test_precision_by_name(design):
    assert evaluate(design, "int4") == evaluate(design, INT4)
    with pytest.raises(UnsupportedPrecision):
        evaluate(design, "INT2")


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_sparsity_never_costs_energy(design, xs, ws):
    dense = evaluate(design, INT8)
    sparse = evaluate(design, INT8, ActivityProfile(0.5, xs, ws))
    assert sparse.energy_fj_per_op <= dense.energy_fj_per_op + 1e-9
    assert sparse.area_um2 == dense.area_um2


@given(st.floats(1e7, 1e9), st.floats(1.0, 4.0))
def test_dynamic_power_linear_in_frequency(design, f, k):
    a, b = evaluate(design, INT4, frequency_hz=f), evaluate(design, INT4, frequency_hz=f * k)
    assert b.dynamic_mw == pytest.approx(a.dynamic_mw * k)
    assert b.energy_fj_per_op == pytest.approx(a.energy_fj_per_op)


def test_objectives_are_worst_case(design):
    p, a, lat = objectives(design)
    sums = [evaluate(design, q) for q in design.spec.precisions]
    assert p == max(s.power_mw for s in sums)
    assert a == max(s.area_um2 for s in sums)
    assert lat == design.latency_cycles


def test_sweep_trend(lib):
    rows = sweep_dimensions(MacroSpec(32, 32, 1, (INT4, INT8), 5e8, 1e8), [32, 64], lib)
    assert [(r["dim"], r["precision"]) for r in rows] == [(32, "INT4"), (32, "INT8"), (64, "INT4"), (64, "INT8")]
    text = trend_csv(rows)
    assert text.splitlines()[0].startswith("dim,precision")
    assert len(text.splitlines()) == 5


def test_sweep_rejects_bad_dim(lib):
    with pytest.raises(ValueError):
        sweep_dimensions(MacroSpec(32, 32, 1, (INT8,), 5e8, 1e8), [48], lib)
