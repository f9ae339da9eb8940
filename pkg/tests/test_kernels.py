import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symlab.errors import InputError
from symlab.kernels import (QuadratureSpec, center_balance, check_kernel, coordinate_kernel,
                            huovinen_angle_residual, huovinen_angle_roots, huovinen_kernel, kernel_from_config,
                            multiplier, multiplier_nonvanishing_scan, multiplier_rows, riesz_kernel, sphere_grid)

ZOO = [riesz_kernel(2), riesz_kernel(3), huovinen_kernel(1), huovinen_kernel(3), huovinen_kernel(5),
       coordinate_kernel()]


def test_riesz_values():
    K = riesz_kernel(2)
    np.testing.assert_array_equal(K([1.0, 0.0]), [1.0, 0.0])
    x = np.array([0.3, -1.7])
    np.testing.assert_array_equal(K(-x), -K(x))
    np.testing.assert_array_equal(K(2 * x), 2 * K(x))


def test_huovinen_values():
    z = np.array([math.cos(math.pi / 6), math.sin(math.pi / 6)])
    np.testing.assert_allclose(huovinen_kernel(3)(z), [0.0, 1.0], atol=1e-15)
    X = np.random.default_rng(0).normal(size=(50, 2))
    np.testing.assert_allclose(huovinen_kernel(1)(X), riesz_kernel(2)(X), atol=1e-14)
    np.testing.assert_allclose(np.linalg.norm(huovinen_kernel(5)(X), axis=1), np.linalg.norm(X, axis=1))
    np.testing.assert_array_equal(huovinen_kernel(3)([0.0, 0.0]), [0.0, 0.0])


def test_coordinate_values():
    C = coordinate_kernel()
    assert C([1.0, 5.0]) == pytest.approx([1.0])
    assert np.all(C(np.column_stack([np.zeros(5), np.linspace(-3, 3, 5)])) == 0)


def test_bad_kernels():
    with pytest.raises(InputError):
        huovinen_kernel(2)
    with pytest.raises(InputError):
        kernel_from_config("gauss")
    with pytest.raises(InputError):
        riesz_kernel(2)([1.0, 2.0, 3.0])


@pytest.mark.parametrize("K", ZOO, ids=lambda K: f"{K.name}{K.params}")
def test_zoo_is_odd_and_homogeneous(K):
    err = check_kernel(K)
    assert err["oddness"] <= 1e-14
    assert err["homogeneity"] <= 1e-12


@pytest.mark.parametrize("theta", np.linspace(0, 2 * math.pi, 16, endpoint=False))
def test_riesz_multiplier_closed_form(theta):
    xi = np.array([math.cos(theta), math.sin(theta)])
    m = multiplier(riesz_kernel(2), xi)
    np.testing.assert_allclose(m.value, -2j * math.pi * xi, atol=1e-10)
    assert m.error < 1e-8


@pytest.mark.parametrize("K", ZOO, ids=lambda K: f"{K.name}{K.params}")
def test_multiplier_is_odd(K):
    xi = sphere_grid(K.dim, 7)[3]
    np.testing.assert_allclose(multiplier(K, -xi).value, -multiplier(K, xi).value, atol=1e-9)


def test_riesz_3d_closed_form():
    # int_{S^2} |w . xi| dw = 2 pi, so m = -(i pi / 2) 2 pi xi
    xi = np.array([0.0, 0.6, 0.8])
    m = multiplier(riesz_kernel(3), xi, QuadratureSpec(sphere_nodes=24))
    np.testing.assert_allclose(m.value, -1j * math.pi**2 * xi, atol=1e-6)


def test_nonvanishing_scans():
    scan = multiplier_nonvanishing_scan(riesz_kernel(2), 16)
    assert scan.min_modulus == pytest.approx(2 * math.pi, abs=1e-9)
    assert scan.nonvanishing
    same = multiplier_nonvanishing_scan(huovinen_kernel(1), 16)
    assert same.min_modulus == pytest.approx(scan.min_modulus, abs=1e-9)
    coord = multiplier_nonvanishing_scan(coordinate_kernel(), 16)
    assert coord.min_modulus < 1e-8
    assert abs(coord.witness[0]) < 1e-12
    assert not coord.nonvanishing


def test_multiplier_rows_layout():
    vals = [multiplier(riesz_kernel(2), xi) for xi in sphere_grid(2, 4)]
    header, rows = multiplier_rows(vals)
    assert header == ["xi_1", "xi_2", "re_m_1", "im_m_1", "re_m_2", "im_m_2", "quad_error"]
    assert len(rows) == 4
    assert rows[0][3] == pytest.approx(-2 * math.pi)


def test_angle_residual_examples():
    assert abs(huovinen_angle_residual(3, 1, 1, math.pi / 3)) < 1e-12
    assert abs(huovinen_angle_residual(3, 1, 1, 0.5)) > 0.1
    assert abs(huovinen_angle_residual(3, 1, 2, math.pi / 3)) > 0.1


@pytest.mark.parametrize("k", [3, 5, 7, 9])
def test_angle_roots(k):
    roots = huovinen_angle_roots(k)
    expected = [math.pi * p / k for p in range(1, k) if math.pi * p / k < math.pi / 2]
    assert len(roots) == len(expected)
    np.testing.assert_allclose(roots, expected, atol=1e-10)


def test_angle_roots_k1_empty():
    assert huovinen_angle_roots(1, (0.0, math.pi / 2 - 1e-3)) == []


def test_angle_roots_coarse_grid_refused():
    with pytest.raises(InputError):
        huovinen_angle_roots(5, n_grid=4)


@pytest.mark.parametrize("n", [3, 5])
def test_center_balance(n):
    rays = math.pi * np.arange(2 * n) / n
    w_equal = np.tile([1.0, 1.0], n)
    assert abs(center_balance(n, rays, w_equal)) <= 1e-12
    assert abs(center_balance(n, rays, np.tile([2.0, 0.5], n))) == pytest.approx(n * 1.5)
    assert center_balance(n, [0.4], [1.0]) == pytest.approx(np.exp(1j * n * 0.4))


# ------------------------------------------------------------- properties


vec2 = st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)).filter(lambda v: math.hypot(*v) > 1e-6)


@given(vec2, st.floats(1e-3, 1e3), st.sampled_from([1, 3, 5, 7]))
def test_huovinen_homogeneous_odd(v, t, k):
    K = huovinen_kernel(k)
    x = np.array(v)
    np.testing.assert_allclose(K(t * x), t * K(x), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(K(-x), -K(x), rtol=1e-12, atol=1e-12)


@given(st.floats(0.01, math.pi / 2 - 0.01), st.floats(0.1, 5), st.floats(0.1, 5))
def test_residual_vanishes_only_at_multiples(theta, c1, c2):
    val = abs(huovinen_angle_residual(3, c1, c2, theta))
    if abs(c1 - c2) > 1e-3:
        assert val > 0
    dist = min(abs(theta - math.pi / 3), abs(theta))
    if c1 == c2 and dist > 1e-3:
        assert val > 0


@given(st.floats(0, 2 * math.pi))
def test_riesz_multiplier_property(theta):
    xi = np.array([math.cos(theta), math.sin(theta)])
    np.testing.assert_allclose(multiplier(riesz_kernel(2), xi).value, -2j * math.pi * xi, atol=1e-9)
