import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from wwrcva.affine import ShiftedAffineModel, cir_coeffs, parameter_set, shifted_coeffs
from wwrcva.termstructure import (
    CurveRangeError,
    ShiftFunction,
    SurvivalCurve,
    calibrate_shift,
    hazard_rate,
    read_curve,
    survival,
)


def cir_bond(set_id):
    p = parameter_set(set_id)
    return lambda t: float(cir_coeffs(p, 0.0, t).bond(p.y0))


# -- flat curves -------------------------------------------------------------------

def test_flat_hazard_values():
    assert hazard_rate(SurvivalCurve.flat(0.15, 10.0), 2.0) == pytest.approx(0.15, abs=1e-14)
    assert hazard_rate(SurvivalCurve.flat(0.30, 10.0), 7.0) == pytest.approx(0.30, abs=1e-14)


def test_flat_survival_values():
    c = SurvivalCurve.flat(0.15, 10.0)
    assert survival(c, 0.0) == 1.0
    assert survival(c, 5.0) == pytest.approx(np.exp(-0.75), rel=1e-14)
    assert survival(c, 5.0) == pytest.approx(0.4724, abs=5e-5)


def test_out_of_range_raises():
    c = SurvivalCurve.flat(0.1, 5.0)
    for t in (-0.1, 5.1):
        with pytest.raises(CurveRangeError):
            survival(c, t)
        with pytest.raises(CurveRangeError):
            hazard_rate(c, t)


@pytest.mark.parametrize(
    "grid, logG",
    [([0.0, 1.0], [0.1, -0.1]), ([0.0, 1.0, 0.5], [0.0, -0.1, -0.2]), ([0.0, 1.0, 2.0], [0.0, -0.2, -0.1])],
)
def test_invalid_curves_rejected(grid, logG):
    with pytest.raises(ValueError):
        SurvivalCurve(grid, logG)


def test_hazard_right_limit_at_knot():
    c = SurvivalCurve([0.0, 1.0, 2.0], [0.0, -0.1, -0.4])
    assert c.hazard_rate(1.0) == pytest.approx(0.3)
    assert c.hazard_rate(0.999) == pytest.approx(0.1)
    assert c.hazard_rate(2.0) == pytest.approx(0.3)


# -- model-generated curves ------------------------------------------------------------

def test_cir_set2_hazard_matches_central_difference():
    model = ShiftedAffineModel(parameter_set(2))
    bond = cir_bond(2)
    fd = -(np.log(bond(1.001)) - np.log(bond(0.999))) / 0.002
    assert model.curve().hazard_rate(1.0) == pytest.approx(fd, abs=1e-6)


def test_cir_set1_curve_reproduces_closed_form():
    p = parameter_set(1)
    grid = np.linspace(0.0, 5.0, 21)
    curve = SurvivalCurve.from_function(cir_bond(1), grid)
    c = cir_coeffs(p, 0.0, 3.0)
    assert curve.survival(3.0) == pytest.approx(c.A * np.exp(-c.B * 0.03), rel=1e-12)


# -- invariants ---------------------------------------------------------------------------

@st.composite
def curves(draw):
    n = draw(st.integers(2, 12))
    steps = draw(st.lists(st.floats(0.05, 3.0), min_size=n - 1, max_size=n - 1))
    hazards = draw(st.lists(st.floats(0.0, 0.8), min_size=n - 1, max_size=n - 1))
    grid = np.concatenate([[0.0], np.cumsum(steps)])
    logG = np.concatenate([[0.0], -np.cumsum(np.array(steps) * np.array(hazards))])
    return SurvivalCurve(grid, logG)


@given(curves(), st.floats(0.0, 1.0))
def test_survival_monotone_and_bounded(curve, frac):
    t = frac * curve.t_max
    g = curve.survival(t)
    assert 0.0 < g <= 1.0
    assert curve.survival(min(t + 0.01, curve.t_max)) <= g + 1e-15
    assert curve.hazard_rate(t) >= 0.0


@given(curves(), st.floats(0.0, 1.0))
def test_survival_rebuilt_from_hazard(curve, frac):
    t = frac * curve.t_max
    pts = [k for k in curve.grid if 0 < k < t]
    integral = quad(curve.hazard_rate, 0.0, t, points=pts or None, limit=200, epsabs=1e-13)[0] if t > 0 else 0.0
    assert np.exp(-integral) == pytest.approx(curve.survival(t), abs=1e-8)


def test_csv_round_trip(tmp_path):
    c = SurvivalCurve.from_function(cir_bond(2), np.linspace(0, 5, 11))
    path = tmp_path / "curve.csv"
    c.to_csv(path)
    assert path.read_text().splitlines()[:2] == ["t,G", "0,1"]
    back = read_curve(path)
    np.testing.assert_allclose(back.survival(back.grid), c.survival(c.grid), rtol=1e-9)


@pytest.mark.parametrize("text", ["x,G\n0,1\n1,0.9\n", "t,G\n0.5,1\n1,0.9\n", "t,G\n0,1\n1,0\n"])
def test_csv_rejects_bad_input(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_curve(path)


# -- shift function and calibration --------------------------------------------------

def test_shift_function_basics():
    z = ShiftFunction.zero()
    assert z.is_zero and z.Psi(3.0) == 0.0 and z.psi(1.0) == 0.0
    c = ShiftFunction.constant(0.02)
    assert c.psi(5.0) == pytest.approx(0.02)
    assert c.Psi(5.0) == pytest.approx(0.1)
    assert c.Psi_between(1.0, 4.0) == pytest.approx(0.06)
    with pytest.raises(ValueError):
        ShiftFunction(np.array([0.0, 1.0]), np.array([0.1, 0.2]))


def test_calibrate_identity_gives_zero_shift():
    grid = np.linspace(0.0, 5.0, 11)
    market = SurvivalCurve.from_function(cir_bond(3), grid)
    shift = calibrate_shift(cir_bond(3), market)
    assert np.max(np.abs(shift.psi(grid))) < 1e-8


def test_calibrate_against_flat_market():
    p = parameter_set(2)
    grid = np.linspace(0.0, 10.0, 21)
    shift = calibrate_shift(cir_bond(2), SurvivalCurve.flat(0.035, 10.0, 21))
    c = cir_coeffs(p, 0.0, grid[1:])
    expected = 0.035 * grid[1:] + np.log(c.A) - c.B * p.y0
    np.testing.assert_allclose(shift.Psi(grid[1:]), expected, rtol=1e-10, atol=1e-14)


@given(st.integers(1, 4), st.floats(0.005, 0.3))
def test_calibration_round_trip(set_id, h):
    p = parameter_set(set_id)
    market = SurvivalCurve.flat(h, 8.0, 17)
    model = ShiftedAffineModel(p, calibrate_shift(cir_bond(set_id), market))
    t = market.grid[1:]
    np.testing.assert_allclose(model.bond(t), market.survival(t), rtol=1e-10)
    # shifted coefficients act on lambda_0 = y_0 + psi(0)
    c = shifted_coeffs(model, 0.0, t)
    np.testing.assert_allclose(c.bond(model.lambda0), market.survival(t), rtol=1e-10)


def test_negative_shift_flagged():
    shift = calibrate_shift(cir_bond(2), SurvivalCurve.flat(0.01, 5.0, 6))
    assert shift.negative
    assert not calibrate_shift(cir_bond(2), SurvivalCurve.flat(0.2, 5.0, 6)).negative
