import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edge_spectral_lab.bands import (
    TRUST_FACTOR,
    BandTable,
    band_minimum,
    build_inverse_band,
    chebyshev_nodes,
    fit_tail,
    format_float,
    gap_asymptotic_ratio,
    invert_band,
    mode_defect,
    neg_mass,
    neg_mass_closed_form,
    projection_distance,
    rho_derivative,
    tabulate_band,
    trust_window,
    _defect,
)
from edge_spectral_lab.fiber import NEUMANN, FiberSpec, band_value
from edge_spectral_lab.numerics import NumericalError
from oracles import gaussian_tail

D = FiberSpec(b=1.0)
N = FiberSpec(b=1.0, bc=NEUMANN)


@pytest.fixture(scope="module")
def inv1():
    return build_inverse_band(D, 1)


# ---------------------------------------------------------------------------
# tables


def test_chebyshev_nodes_endpoints_and_order():
    x = chebyshev_nodes(-2.0, 3.0, 17)
    assert x[0] == -2.0 and x[-1] == 3.0
    assert np.all(np.diff(x) > 0)
    np.testing.assert_allclose(x[8], 0.5, atol=1e-15)


def test_format_float_round_trips():
    for v in (math.pi, -1e-300, 0.0, 1 / 3):
        assert float(format_float(v)) == v
    assert format_float(1.0) == "1.0000000000000000e+00"


@pytest.fixture(scope="module")
def table1():
    return tabulate_band(D, 1, -6.0, 6.0, 41)


def test_table_decreasing_and_above_level(table1):
    dE = np.diff(table1.energies)
    ok = np.abs(dE) > table1.disc_errors[:-1] + table1.disc_errors[1:]
    assert ok.sum() >= 30
    assert np.all(dE[ok] < 0)
    assert np.all(table1.gaps > -table1.disc_errors)
    assert table1.report["violations"] == 0
    assert table1.report["pairs"] == 40


def test_table_derivatives_negative(table1):
    assert np.all(table1.derivatives < 0)


def test_second_band_dominates():
    ks = np.linspace(-3, 3, 7)
    for k in ks:
        assert band_value(D, 2, k)[0] > band_value(D, 1, k)[0] + 1.5


def test_table_csv_header_and_rows(table1):
    lines = table1.to_csv().splitlines()
    assert lines[0] == "k,E,dE,disc_error"
    assert len(lines) == 42
    assert float(lines[1].split(",")[0]) == -6.0


def test_table_validation():
    a = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        BandTable(D, 1, np.array([1.0, 0.0]), a, a, a)
    with pytest.raises(ValueError):
        BandTable(D, 1, a, a[:1], a, a)
    with pytest.raises(ValueError):
        tabulate_band(D, 1, 1.0, 0.0, 20)
    with pytest.raises(ValueError):
        tabulate_band(D, 1, 0.0, 1.0, 8)


# ---------------------------------------------------------------------------
# trustworthy window and tail


def test_trust_window_values():
    lo, hi = trust_window(D, 1)
    assert lo == 0.0
    assert 3.9 < hi < 4.4
    _, hi2 = trust_window(FiberSpec(b=2.0), 1)
    assert abs(hi2 / hi - math.sqrt(2)) < 0.05


def test_trust_window_criterion_holds_at_edge():
    _, hi = trust_window(D, 1)
    E, err = band_value(D, 1, hi - 0.01)
    assert E - 1 >= TRUST_FACTOR * err


def test_gap_ratio_outside_window_raises():
    with pytest.raises(NumericalError):
        gap_asymptotic_ratio(D, 1, 6.0)


@given(st.floats(1.5, 4.0))
def test_gap_ratio_positive(k):
    assert gap_asymptotic_ratio(D, 1, k) > 0


def test_tail_model_matches_direct_solves():
    tail = fit_tail(D, 1)
    assert tail.sign == 1.0
    for k in (3.5, 4.0):
        assert abs(tail.s(k) / (band_value(D, 1, k)[0] - 1) - 1) < 5e-3
    s = float(tail.s(5.0))
    assert abs(tail.k_of_s(s)[0] - 5.0) < 1e-10


# ---------------------------------------------------------------------------
# inverse


def test_inverse_round_trip_at_one(inv1):
    s = band_value(D, 1, 1.0)[0] - 1
    assert abs(invert_band(inv1, s) - 1.0) < 1e-8


def test_inverse_s_equals_two_is_zero(inv1):
    assert abs(invert_band(inv1, 2.0)) < 1e-8


@given(st.floats(-1.5, 4.0))
def test_inverse_round_trip(inv1, k):
    s = band_value(D, 1, k)[0] - 1
    assert abs(invert_band(inv1, s) - k) < 1e-8


def test_inverse_outside_range_raises(inv1):
    with pytest.raises(NumericalError):
        invert_band(inv1, inv1.s_max * 2)


def test_rho_decreasing(inv1):
    s = np.geomspace(1e-6, 2.0, 12)
    k = [invert_band(inv1, v) for v in s]
    assert np.all(np.diff(k) < 0)


def test_rho_derivative_chain_rule(inv1):
    h = 1e-5
    fd = (invert_band(inv1, 2 + h) - invert_band(inv1, 2 - h)) / (2 * h)
    assert abs(rho_derivative(inv1, 2.0) / fd - 1) < 1e-5


def test_rho_derivative_log_scaling(inv1):
    # rho ~ sqrt(b |ln s|) gives rho'(s) s sqrt|ln s| -> -1/2
    vals = [rho_derivative(inv1, s) * s * math.sqrt(abs(math.log(s))) for s in (1e-6, 1e-5, 1e-4)]
    for v in vals:
        assert -0.75 < v < -0.25


def test_rho_log_scaling(inv1):
    vals = [invert_band(inv1, s) / math.sqrt(abs(math.log(s))) for s in (1e-6, 1e-4, 1e-2)]
    assert max(vals) / min(vals) < 2


def test_tail_extends_interpolant_below_window(inv1):
    k = inv1.k_guess(1e-12)
    assert k > trust_window(D, 1)[1]
    assert abs(k - float(inv1.tail.k_of_s(1e-12)[0])) < 1e-10
    assert abs(float(inv1.s_interp(k)) / 1e-12 - 1) < 1e-10
    assert float(inv1.ds_interp(k)) < 0
    with pytest.raises(NumericalError):
        invert_band(inv1, 1e-12)


def test_inverse_band_validation(inv1):
    from edge_spectral_lab.bands import InverseBand

    with pytest.raises(ValueError):
        InverseBand(inv1.table, 0.0, 1.0)
    with pytest.raises(ValueError):
        InverseBand(inv1.table, 1.0, 0.5)


# ---------------------------------------------------------------------------
# mode defect and projections


def test_defect_at_five():
    assert mode_defect(D, 1, 5.0) <= 1e-3


def test_defect_decreasing():
    d = [mode_defect(D, 1, k) for k in (1.0, 2.0, 3.0, 4.0)]
    assert np.all(np.diff(d) < 0)


def test_defect_order_one_at_zero():
    assert 0.3 < _defect(D, 1, 0.0) < 1.5
    with pytest.raises(ValueError):
        mode_defect(D, 1, 0.0)


def test_projection_distance_properties():
    assert projection_distance(D, 1, 1.0, 1.0) < 1e-7
    a = projection_distance(D, 1, 0.5, 1.2)
    assert abs(a - projection_distance(D, 1, 1.2, 0.5)) < 1e-12
    assert 0 < a <= 1


@given(st.floats(0.0, 3.5), st.floats(0.01, 0.5))
def test_projection_distance_lipschitz(k, dk):
    # for the free limit mode the distance is sqrt(1 - exp(-dk^2/2)) <= dk/sqrt(2); the edge only slows rotation
    assert projection_distance(D, 1, k, k + dk) <= dk


# ---------------------------------------------------------------------------
# negative-half-line mass


def test_neg_mass_values():
    assert abs(neg_mass(1, 0.0, 1.0) - 0.5) < 1e-14
    assert abs(neg_mass(1, 2.0, 1.0) - 0.0023388674905236) < 1e-12


@given(st.floats(-6, 6), st.floats(0.25, 4))
def test_neg_mass_matches_erfc(k, b):
    assert abs(neg_mass(1, k, b) - gaussian_tail(k, b)) < 1e-12
    assert abs(neg_mass_closed_form(k, b) - gaussian_tail(k, b)) < 1e-15


@given(st.integers(1, 4), st.floats(-5, 5))
def test_neg_mass_in_unit_interval_and_symmetric(j, k):
    m = neg_mass(j, k, 1.0)
    assert 0 <= m <= 1
    assert abs(m + neg_mass(j, -k, 1.0) - 1) < 1e-12


def test_neg_mass_rejects_bad_args():
    with pytest.raises(ValueError):
        neg_mass(0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# Neumann minimum


def test_neumann_band_minimum():
    kmin, Emin = band_minimum(N)
    assert abs(kmin - 0.7681836532) < 1e-8
    assert abs(Emin - 0.5901061250) < 1e-8
    # at the minimum the mode value satisfies psi(0)^2 = E - k^2... which vanishes: k_min^2 = E_min
    assert abs(kmin**2 - Emin) < 1e-8


def test_neumann_branches():
    left = build_inverse_band(N, 1, "decreasing", n_nodes=32)
    right = build_inverse_band(N, 1, "increasing", n_nodes=32)
    s = -0.2
    kl, kr = invert_band(left, s), invert_band(right, s)
    assert kl < 0.7681836532 < kr
    for k in (kl, kr):
        assert abs(band_value(N, 1, k)[0] - 1 - s) < 1e-9
