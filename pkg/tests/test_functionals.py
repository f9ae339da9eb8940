import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symlab.errors import InputError, PreconditionError, ResolutionError, TrustedWindowError
from symlab.functionals import (PHI, CutoffEta, annulus_sup, density_ratio, density_scan, optimal_epsilon,
                                pv_estimator, pv_to_sla_check, radial_test_integral, sla_functional, sla_scan,
                                symmetric_point_scan, symmetry_defect, telescoping_bound, telescoping_constant)
from symlab.kernels import coordinate_kernel, huovinen_kernel, riesz_kernel
from symlab.measures import (MeasureSpec, make_atomic_measure, make_flat_measure, make_lines_measure,
                             make_spike_measure, zero_measure)

RIESZ = riesz_kernel(2)
H3 = huovinen_kernel(3)


def flat_line(h=1e-3, R=10.0, angle=math.pi / 6):
    u = [math.cos(angle), math.sin(angle)]
    return make_flat_measure(2, 1, [u], [0.0, 0.0], 1.0, R, h)


def generic_lines(h=1e-3):
    return make_lines_measure([0.0, 0.9, 2.1], [0.0, 0.0], 1.0, 10.0, h)


# ---------------------------------------------------------------- cutoffs


def test_eta_and_phi_shapes():
    eta = CutoffEta(0.5)
    np.testing.assert_allclose(eta([0.0, 0.5, 0.75, 1.0, 2.0]), [1.0, 1.0, 0.5, 0.0, 0.0])
    np.testing.assert_allclose(PHI([0.0, 3.0, 3.5, 4.0, 9.0]), [1.0, 1.0, 0.5, 0.0, 0.0])
    with pytest.raises(InputError):
        CutoffEta(0.0)


def test_phi_derivative_bound():
    t = np.linspace(2.9, 4.1, 2001)
    assert np.abs(PHI.derivative(t)).max() == pytest.approx(PHI.max_derivative, rel=1e-6)
    np.testing.assert_allclose(np.gradient(PHI(t), t)[5:-5], PHI.derivative(t)[5:-5], atol=1e-5)


# -------------------------------------------------------------------- SLA


def test_sla_single_atom_hand_value():
    mu = make_atomic_measure([[1.0, 0.0]], [1.0])
    # eta(1/2) = 1 and r^-(s+1) = 1/4
    np.testing.assert_array_equal(sla_functional(mu, RIESZ, [0.0, 0.0], 2.0, 0.5, 1.0), [-0.25, 0.0])


def test_sla_flat_line_vanishes():
    mu = flat_line()
    x = np.array([math.cos(math.pi / 6), math.sin(math.pi / 6)]) * 0.3
    assert np.linalg.norm(sla_functional(mu, RIESZ, x, 0.5, 0.5, 1.0)) < 1e-12


def test_sla_scan_flat_verdict():
    sc = sla_scan(flat_line(h=5e-4), RIESZ, [0.0, 0.0], 0.8 ** np.arange(20), 0.5, 1.0)
    assert sc.verdict
    assert sc.tail_max < 1e-12
    assert sc.header() == ["r", "value_1", "value_2", "quad_error_estimate"]


def test_sla_scan_generic_lines_off_centre():
    x = np.array([0.5, 0.0])
    sc = sla_scan(generic_lines(), H3, x, 2.0 ** -np.arange(-1, 2, dtype=float), 0.5, 1.0, threshold=0.02)
    assert sc.tail_min >= 0.05
    assert not sc.verdict


def test_sla_guards():
    mu = flat_line(h=0.01, R=2.0)
    with pytest.raises(ResolutionError):
        sla_functional(mu, RIESZ, [0.0, 0.0], 0.1, 0.5, 1.0)
    with pytest.raises(TrustedWindowError):
        sla_functional(mu, RIESZ, [0.0, 0.0], 3.0, 0.5, 1.0)
    with pytest.raises(InputError):
        sla_scan(mu, RIESZ, [0.0, 0.0], [1.0, 1.0], 0.5, 1.0)


def test_radial_integral_reproduces_sla():
    mu = generic_lines(h=0.01)
    x, r, tau, s = np.array([0.3, 0.0]), 0.8, 0.4, 1.0
    eta = CutoffEta(tau)
    direct = radial_test_integral(mu, H3, x, lambda d: eta(d / r), r)
    np.testing.assert_allclose(direct / r ** (s + 1), sla_functional(mu, H3, x, r, tau, s), rtol=0, atol=1e-15)


# ------------------------------------------------------------ symmetry


def test_defect_flat_and_spike_centre():
    radii = np.geomspace(1.0, 0.05, 12)
    assert symmetry_defect(flat_line(), RIESZ, [0.0, 0.0], radii, 1.0) < 1e-12
    sp = make_spike_measure(3, 3, 0.0, [0.0, 0.0], 1.0, 5.0, 1e-3)
    assert symmetry_defect(sp, H3, [0.0, 0.0], radii, 1.0) < 1e-12


def test_defect_full_output_and_scan():
    mu = generic_lines(h=1e-3)
    pts = [[0.0, 0.0], [0.5, 0.0]]
    reports = symmetric_point_scan(mu, H3, pts, np.geomspace(1.0, 0.3, 6), 1.0)
    assert reports[0].symmetric
    assert not reports[1].symmetric
    d, info = symmetry_defect(mu, H3, [0.5, 0.0], np.geomspace(1.0, 0.3, 6), 1.0, full_output=True)
    assert d == reports[1].defect
    assert info["error_estimate"] > 0
    assert d > 3 * info["error_estimate"]


def test_coordinate_symmetry_of_vertical_line():
    mu = make_flat_measure(2, 1, [[0.0, 1.0]], [0.0, 0.0], 1.0, 5.0, 0.01)
    assert symmetry_defect(mu, coordinate_kernel(), [0.0, 0.3], [1.0, 0.5], 1.0) == 0.0


# -------------------------------------------------------------- density


def test_density_examples():
    sc = density_scan(flat_line(), [0.0, 0.0], np.geomspace(1.0, 0.05, 10), 1.0)
    np.testing.assert_allclose(sc.magnitudes, 2.0, atol=2e-3 / 0.05)
    assert density_ratio(zero_measure(2), [0.0, 0.0], 1.0, 1.0) == 0.0


# ------------------------------------------------------- principal values


def test_pv_flat_line_and_atom():
    # x = 0 is itself an atom of the line
    with pytest.warns(RuntimeWarning, match="excluded"):
        res = pv_estimator(flat_line(), RIESZ, [0.0, 0.0], 1.0, np.geomspace(0.5, 0.02, 8))
    assert np.abs(res.values).max() < 1e-12
    assert res.cauchy_defect < 1e-12
    atom = make_atomic_measure([[1.0, 0.0]], [1.0])
    res = pv_estimator(atom, RIESZ, [0.0, 0.0], 1.0, [0.9, 0.5, 0.1])
    np.testing.assert_allclose(res.values, [[-1.0, 0.0]] * 3)
    assert res.cauchy_defect == 0.0


def test_pv_centre_atom_is_excluded():
    mu = make_atomic_measure([[0.0, 0.0], [1.0, 0.0]], [5.0, 1.0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = pv_estimator(mu, RIESZ, [0.0, 0.0], 1.0, [0.5, 0.1])
    assert res.excluded_center_atom
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


def test_pv_generic_lines_off_centre():
    # below the distance to the other lines only the own line is truncated, and it cancels:
    # the principal value exists but is not zero
    with pytest.warns(RuntimeWarning, match="excluded"):
        res = pv_estimator(generic_lines(), H3, [0.5, 0.0], 1.0, np.geomspace(0.3, 0.02, 12))
    assert res.cauchy_defect < 1e-9
    assert np.linalg.norm(res.values[-1]) > 0.05


def test_annulus_sup_single_atom():
    atom = make_atomic_measure([[0.5, 0.0]], [1.0])
    # one term of size w / |p|^(s+1) |Omega(-p)| = 1 / 0.25 * 0.5
    assert annulus_sup(atom, RIESZ, [0.0, 0.0], 1.0, 1.0) == pytest.approx(2.0)


def test_pv_to_sla_examples():
    mu = flat_line()
    chk = pv_to_sla_check(mu, RIESZ, [0.0, 0.0], 1.0, 0.5, 0.1, 0.0)
    assert chk.lhs < 1e-12
    assert chk.passed
    atom = make_atomic_measure([[0.3, 0.4]], [1.0])
    x, r, s = [0.0, 0.0], 1.0, 1.0
    delta = annulus_sup(atom, RIESZ, x, s, r)
    chk = pv_to_sla_check(atom, RIESZ, x, s, r, 0.1, delta)
    assert chk.passed
    # |r^-(s+1) Omega(-p)| with |p| = 0.5
    assert chk.lhs == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        pv_to_sla_check(atom, RIESZ, x, s, r, 0.1, delta / 2)


def test_optimal_epsilon_near_sqrt():
    k, delta = 2.0, 0.02
    grid = np.linspace(0.01, 0.49, 49)
    assert optimal_epsilon(k, delta, grid) == pytest.approx(math.sqrt(delta / k), abs=0.01)


@given(st.floats(0.01, 0.49), st.floats(0.5, 2.0))
def test_telescoping_constant_dominates(eps, s):
    C = telescoping_constant(eps, s)
    for k, delta in [(1.0, 0.0), (0.0, 1.0), (2.0, 0.3)]:
        assert telescoping_bound(k, delta, eps, s) <= C * (eps * k + delta / eps) * (1 + 1e-12)


# ------------------------------------------------------------- properties


atoms = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 2.0)), min_size=1, max_size=25)


@given(atoms, st.floats(0.2, 3.0))
def test_layer_cake_identity(rows, support):
    arr = np.array(rows)
    mu = make_atomic_measure(arr[:, :2], arr[:, 2])
    eta = CutoffEta(0.3)

    def psi(d):
        return eta(d / support)

    a = radial_test_integral(mu, H3, [0.1, -0.2], psi, support)
    b = radial_test_integral(mu, H3, [0.1, -0.2], psi, support, layer_cake=True)
    np.testing.assert_allclose(a, b, atol=1e-9)


@given(atoms, st.floats(0.1, 2.0), st.floats(0.1, 0.9))
def test_sla_reflection_symmetric_measure_vanishes(rows, r, tau):
    arr = np.array(rows)
    pts = np.vstack([arr[:, :2], -arr[:, :2]])
    w = np.concatenate([arr[:, 2], arr[:, 2]])
    mu = make_atomic_measure(pts, w)
    val = sla_functional(mu, RIESZ, [0.0, 0.0], r, tau, 1.0)
    assert np.linalg.norm(val) <= 1e-12 * max(1.0, w.sum() / r**2)


@given(atoms, st.floats(0.1, 2.0), st.floats(0.1, 0.9), st.floats(0.1, 10.0))
def test_sla_linear_in_measure(rows, r, tau, lam):
    arr = np.array(rows)
    mu = make_atomic_measure(arr[:, :2], arr[:, 2])
    a = sla_functional(mu, H3, [0.0, 0.0], r, tau, 1.0)
    b = sla_functional(mu.scaled(lam), H3, [0.0, 0.0], r, tau, 1.0)
    np.testing.assert_allclose(b, lam * a, rtol=1e-12, atol=1e-12)


def test_spec_and_materialized_measure_agree():
    spec = MeasureSpec("lines", {"angles": [0.0, 0.9, 2.1], "center": [0.0, 0.0], "densities": 1.0,
                                 "R": 10.0, "h": 0.05}, h_ratio=200)
    x, r = np.array([0.5, 0.0]), 0.5
    mu = spec.materialize(r, x, extent=r)
    np.testing.assert_array_equal(sla_functional(spec, H3, x, r, 0.5, 1.0), sla_functional(mu, H3, x, r, 0.5, 1.0))
