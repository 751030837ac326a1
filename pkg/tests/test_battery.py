"""Battery model tests: OCV curve, coulomb counting, protection flags."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from padsim import battery as bat


def test_ocv_anchor_points():
    assert bat.ocv(1.0) == pytest.approx(4.2)
    assert bat.ocv(0.1) == pytest.approx(3.7)
    assert bat.ocv(0.0) == pytest.approx(3.3)


def test_ocv_interpolates_linearly():
    assert bat.ocv(0.55) == pytest.approx(3.95)
    assert bat.ocv(0.05) == pytest.approx(3.5)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ocv_monotone(a, b):
    lo, hi = sorted((a, b))
    assert bat.ocv(lo) <= bat.ocv(hi) + 1e-12


def test_ocv_rejects_out_of_range():
    with pytest.raises(bat.BatteryError):
        bat.ocv(1.2)


def test_coulomb_counting_oracle():
    # 2.2 A for one hour empties a 2200 mAh cell exactly
    state = bat.BatteryState.at_soc(1.0)
    state = bat.draw(state, 2.2, 3600.0)
    assert state.charge == pytest.approx(0.0)
    assert state.depleted


def test_half_discharge():
    state = bat.BatteryState.at_soc(1.0)
    for _ in range(1800):
        state = bat.draw(state, 2.2, 1.0)
    assert state.soc == pytest.approx(0.5, abs=1e-9)


def test_sag_under_load():
    state = bat.BatteryState.at_soc(1.0)
    loaded = bat.draw(state, 4.0, 0.1)
    # 4 A across 50 mohm sags the terminal by 0.2 V
    assert loaded.terminal_voltage == pytest.approx(bat.ocv(loaded.soc) - 0.2)


def test_overcurrent_flag_and_clamp():
    state = bat.BatteryState.at_soc(1.0)
    hit = bat.draw(state, 7.0, 1.0)
    assert hit.overcurrent
    assert hit.current == bat.MAX_CURRENT_A
    ok = bat.draw(state, 4.9, 1.0)
    assert not ok.overcurrent


def test_depleted_cell_stays_empty():
    state = bat.BatteryState.at_soc(0.0)
    assert state.depleted
    after = bat.draw(state, 3.0, 10.0)
    assert after.charge == 0.0
    assert after.current == 0.0
    assert bat.loaded_voltage(after, 1.0) == 0.0


def test_loaded_voltage_fixed_point():
    # V = OCV / (1 + G * R): check the implied circuit equation holds
    state = bat.BatteryState.at_soc(1.0)
    g = 3 / 2.6
    v = bat.loaded_voltage(state, g)
    assert v == pytest.approx(bat.ocv(1.0) - (v * g) * bat.INTERNAL_RESISTANCE)


def test_negative_current_rejected():
    with pytest.raises(bat.BatteryError):
        bat.draw(bat.BatteryState.at_soc(0.5), -1.0, 1.0)


@given(st.floats(0.01, 1.0), st.floats(0.0, 5.0), st.floats(0.01, 10.0))
def test_draw_never_increases_charge(soc, current, dt):
    before = bat.BatteryState.at_soc(soc)
    after = bat.draw(before, current, dt)
    assert after.charge <= before.charge
    assert 0.0 <= after.soc <= 1.0
    assert bat.VOLTAGE_MIN <= after.terminal_voltage <= bat.VOLTAGE_MAX
