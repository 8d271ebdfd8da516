import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from pint4th.diagnostics import (
    ConvergenceReport, PhysicsTrace, discrete_energy, error_linf_l2, error_linf_linf,
    read_report_json, total_mass, write_report,
)
from pint4th.steppers import TimeGrid, Trajectory

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_linf_l2_examples():
    ref = Trajectory(np.zeros((3, 5)), TimeGrid(1.0, 0.5))
    assert error_linf_l2(ref, ref, 0.25) == 0.0
    c = np.full((2, 5), -0.7)
    assert error_linf_l2(c, ref, 0.25) == pytest.approx(0.7)
    e2 = np.zeros((1, 5))
    e2[0, 1] = 1.0
    assert error_linf_l2(e2, np.zeros((1, 5)), 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        error_linf_l2(np.zeros((2, 4)), ref, 0.25)


def test_linf_linf_examples():
    a = np.zeros((2, 3))
    b = a.copy()
    b[1, 2] = 0.3
    assert error_linf_linf(a, a) == 0.0
    assert error_linf_linf(b, a) == pytest.approx(0.3)
    assert error_linf_linf(-b, a) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        error_linf_linf(np.zeros((2, 3)), np.zeros((3, 3)))


@given(arrays(float, (3, 5), elements=finite), arrays(float, (3, 5), elements=finite),
       st.floats(-10, 10))
def test_norm_axioms(u, v, c):
    for norm in (lambda a, b: error_linf_l2(a, b, 0.25), error_linf_linf):
        assert norm(u, v) >= 0
        assert (norm(u, v) == 0) == np.array_equal(u, v)
        assert norm(c * u, c * v) == pytest.approx(abs(c) * norm(u, v), rel=1e-9, abs=1e-9)


def test_energy_examples():
    n, h = 65, 1 / 64
    assert discrete_energy(np.ones(n), 0.1, h) == 0.0
    assert discrete_energy(np.zeros(n), 0.1, h) == pytest.approx(0.25)
    x = np.linspace(0, 1, n)
    exact = 0.25 * (1 - 2 / 3 + 1 / 5) + 0.005
    assert discrete_energy(x, 0.1, h) == pytest.approx(exact, abs=1e-4)


def test_energy_converges_with_h():
    errs = []
    for n in (17, 33, 65):
        x = np.linspace(0, 1, n)
        u = np.cos(np.pi * x)
        exact = 0.25 * (1 - 1 + 3 / 8) + 0.5 * 0.01 * np.pi**2 / 2
        errs.append(abs(discrete_energy(u, 0.1, 1 / (n - 1)) - exact))
    assert errs[1] < errs[0] and errs[2] < errs[1]
    assert np.log2(errs[1] / errs[2]) >= 1.0


def test_energy_2d():
    n = 9
    assert discrete_energy(np.zeros(n * n), 0.1, 1 / 8, dim=2) == pytest.approx(0.25)
    x = np.linspace(0, 1, n)
    u = np.add.outer(x, 0 * x).ravel()
    # gradient energy of u = x on the unit square is eps^2 / 2
    grad_only = discrete_energy(u, 0.1, 1 / 8, 2) - discrete_energy(u, 0.0, 1 / 8, 2)
    assert grad_only == pytest.approx(0.005)


def test_mass_examples():
    n = 11
    h = 0.1
    assert total_mass(np.ones(n), h) == pytest.approx(1.0)
    x = np.linspace(0, 1, n)
    assert total_mass(x - 0.5, h) == pytest.approx(0.0, abs=1e-15)
    assert total_mass(np.ones(n * n), h, 2) == pytest.approx(1.0)


@given(arrays(float, 9, elements=finite), arrays(float, 9, elements=finite), st.floats(-5, 5))
def test_mass_linear(u, v, c):
    h = 1 / 8
    assert total_mass(u + v, h) == pytest.approx(total_mass(u, h) + total_mass(v, h), abs=1e-9)
    assert total_mass(u + c, h) == pytest.approx(total_mass(u, h) + c, abs=1e-9)


def test_physics_trace():
    states = np.array([np.linspace(-1, 1, 9), np.zeros(9)])
    tr = PhysicsTrace.from_states(states, 0.1, 0.25)
    assert len(tr.energy) == len(tr.mass) == 2
    assert tr.energy_increments().shape == (1,)
    assert tr.relative_mass_drift(states[0], 0.25) == pytest.approx(0.0, abs=1e-15)


def _report(**kw):
    base = dict(errors_per_iteration=[1e-2, 1e-5, 1e-8, 1e-11], norm_kind="linf_l2",
                theoretical_rho=1e-3, converged=True, iterations=4, initial_error=1.0)
    base.update(kw)
    return ConvergenceReport(**base)


def test_csv_schema(tmp_path):
    path = write_report(_report(), None, tmp_path / "r.csv")
    lines = path.read_text().split("\n")
    assert lines[0] == "k,error,bound"
    assert len(path.read_text().splitlines()) == 4 + 1
    assert lines[1].startswith("1,0.01,")
    empty = write_report(_report(errors_per_iteration=[], iterations=0), None, tmp_path / "e.csv")
    assert empty.read_text() == "k,error,bound\n"


def test_csv_bit_stable(tmp_path):
    a = write_report(_report(), None, tmp_path / "a.csv").read_bytes()
    b = write_report(_report(), None, tmp_path / "b.csv").read_bytes()
    assert a == b


def test_json_round_trip(tmp_path):
    rep = _report(notes=["x"], inner_iterations=[3, 2], initial_modal_error=0.5)
    tr = PhysicsTrace([1.0, 0.5], [0.1, 0.1])
    path = write_report(rep, tr, tmp_path / "r.json", config={"alpha": 0.001})
    got, got_tr, cfg = read_report_json(path)
    assert got == rep and got_tr == tr and cfg == {"alpha": 0.001}
    nan_path = write_report(_report(), None, tmp_path / "n.json")
    assert np.isnan(read_report_json(nan_path)[0].initial_modal_error)


def test_write_errors(tmp_path):
    with pytest.raises(ValueError):
        write_report(_report(), None, tmp_path / "r.txt", fmt="xml")
    with pytest.raises(OSError, match="cannot write"):
        write_report(_report(), None, tmp_path / "missing" / "r.csv")


def test_ratios_and_bound():
    rep = _report()
    np.testing.assert_allclose(rep.ratios(), [1e-3, 1e-3, 1e-3])
    np.testing.assert_allclose(rep.bound_curve(), [1e-3, 1e-6, 1e-9, 1e-12])
    assert all(np.isnan(_report(theoretical_rho=None).bound_curve()))


@pytest.mark.parametrize("tiny", [1e-200, 5e-324])
def test_linf_l2_no_underflow(tiny):
    a = np.zeros((2, 5))
    assert error_linf_l2(a + tiny, a, 0.25) > 0
