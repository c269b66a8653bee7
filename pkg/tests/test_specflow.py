from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hamflow import catalog, specflow
from hamflow.errors import AssumptionError, ConvergenceError, IrregularCrossingError
from hamflow.specflow import (
    _pick_radius,
    default_discretization,
    detect_crossings,
    discretized_flow,
    endpoint_terms,
    regularize,
    regularize_family,
    spectral_flow_crossings,
    spectral_flow_discretized,
)

FAST = dict(T_num=12.0, N=1200)


def disc(fam, **kw):
    return default_discretization(fam, **{**FAST, **kw})


def test_detect_poschl_teller(pt):
    (lam,) = detect_crossings(pt)
    assert abs(pt.physical(lam) + 1.0) < 1e-6


def test_detect_deep_well(pt_deep):
    found = [pt_deep.physical(x) for x in detect_crossings(pt_deep)]
    assert found == pytest.approx([-4.0, -1.0], abs=1e-6)


def test_no_crossings_for_autonomous_family(constant):
    assert detect_crossings(constant) == []


def test_endpoint_crossing_violates_a2():
    fam = catalog.poschl_teller(lam=(-2.0, -1.0))
    with pytest.raises(AssumptionError) as err:
        detect_crossings(fam)
    assert err.value.assumption == "A2"


def test_crossing_route_poschl_teller(pt):
    sfl, reports = spectral_flow_crossings(pt)
    assert sfl == -1
    (r,) = reports
    assert r.regular and r.kernel_dim == 1 and abs(r.signature) <= r.kernel_dim
    assert r.form.L[0, 0] == pytest.approx(-1.125, abs=1e-6)
    assert endpoint_terms(pt) == (0, 0)


def test_reversal_flips_both_routes(pt):
    rev = pt.reversed()
    assert spectral_flow_crossings(rev)[0] == 1
    assert spectral_flow_discretized(rev, disc(rev)) == 1


def test_regularize_keeps_regular_family(pt):
    delta, fam = regularize(pt)
    assert delta == 0.0 and fam is pt


def test_degenerate_crossing_needs_a_shift():
    fam = catalog.build("rotating_boundary")
    with pytest.raises(IrregularCrossingError):
        spectral_flow_crossings(fam)
    reg = regularize_family(fam)
    assert reg.delta != 0.0
    assert all(r.regular for r in reg.reports)
    # the shift splits the cubic tangency away from the centre
    assert all(abs(r.lambda0 - 0.5) > 1e-3 for r in reg.reports)
    assert spectral_flow_crossings(reg.family)[0] == spectral_flow_discretized(fam, disc(fam)) == 1


def test_regularize_reports_every_attempt():
    fam = catalog.build("rotating_boundary")
    with pytest.raises(ConvergenceError, match="delta=0"):
        regularize(fam, delta_grid=(0.0,))


def test_discretized_operator_is_symmetric(pt):
    d = disc(pt, N=200)
    A = d.dense(0.4)
    assert d.size == (2 * d.N - 1) * pt.n
    assert np.max(np.abs(A - A.T)) <= 1e-10
    block = catalog.build("block_direct_sum")
    B = default_discretization(block, T_num=6.0, N=100).dense(0.4)
    assert np.max(np.abs(B - B.T)) <= 1e-10


def test_discrete_eigenvalue_crosses_near_the_bound_state(pt):
    d = disc(pt)
    assert np.min(np.abs(d.eigenvalues(2.0 / 3.0, 0.1))) < 1e-3
    flow = discretized_flow(pt, d)
    (a, b, jump), = flow.crossing_intervals
    assert a <= 2.0 / 3.0 <= b and jump == -1


@pytest.mark.parametrize("boundary", ["plateau", "dirichlet"])
def test_boundary_choices_agree(pt_deep, boundary):
    assert spectral_flow_discretized(pt_deep, disc(pt_deep, boundary=boundary)) == -2


def test_backends_agree_on_discretized_flow():
    fam = catalog.build("block_direct_sum")
    d = disc(fam)
    a = discretized_flow(fam, d, backend="numba")
    b = discretized_flow(fam, d, backend="numpy")
    assert a.sfl == b.sfl == -2


def test_window_failure_is_reported(pt, monkeypatch):
    monkeypatch.setattr(specflow, "MAX_BISECTIONS", 0)
    with pytest.raises(ConvergenceError):
        discretized_flow(pt, disc(pt, N=300), lambda_steps=1)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-0.3, 0.3), max_size=6),
    st.lists(st.floats(-0.3, 0.3), max_size=6),
    st.floats(0.0, 0.05),
)
def test_window_radius_clears_all_eigenvalues(ea, eb, move):
    a = _pick_radius(np.array(ea), np.array(eb), move, 0.25, 1e-6)
    if a is None:
        return
    assert 1e-6 <= a <= 0.25 - move
    assert all(abs(abs(x) - a) > move for x in ea + eb)
