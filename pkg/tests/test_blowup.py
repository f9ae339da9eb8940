import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symlab.blowup import (BlowupSequence, build_test_net, rescale, tangent_symmetry_experiment,
                           weak_convergence_diagnostic)
from symlab.errors import InputError, TrustedWindowError
from symlab.kernels import huovinen_kernel, riesz_kernel
from symlab.measures import MeasureSpec, ball_mass, make_atomic_measure, make_flat_measure

LINE_SPEC = MeasureSpec("flat", {"d": 2, "s": 1, "basis": [[1.0, 0.0]], "center": [0.0, 0.0], "density": 1.0,
                                 "R": 10.0, "h": 0.01}, h_ratio=100)


def test_rescale_identity_and_line():
    mu = make_atomic_measure([[0.5, -1.0], [2.0, 0.0]], [1.0, 3.0])
    same = rescale(mu, [0.0, 0.0], 1.0, 1.0)
    np.testing.assert_array_equal(same.points, mu.points)
    np.testing.assert_array_equal(same.weights, mu.weights)
    line = make_flat_measure(2, 1, [[1.0, 0.0]], [0.0, 0.0], 1.0, 10.0, 1e-3)
    blown = rescale(line, [0.0, 0.0], 0.25, 1.0)
    assert abs(ball_mass(blown, [0.0, 0.0], 1.0) - 2.0) <= blown.resolution * (1 + 1e-9)
    with pytest.raises(InputError):
        rescale(mu, [0.0, 0.0], 0.0, 1.0)


def test_test_net_size_and_bound():
    net = build_test_net(1.0)
    # points of (Z / 2)^2 strictly inside the radius-4 disc
    k = np.arange(-8, 9)
    expected = int((np.add.outer(k**2, k**2) < 64).sum())
    assert net.size == expected
    y = np.random.default_rng(0).uniform(-5, 5, size=(300, 2))
    vals = net(y)
    assert vals.min() >= 0.0
    assert vals.max() <= 1.0
    assert np.all(vals[np.linalg.norm(y, axis=1) >= 4.0] == 0.0)


def test_test_net_limit():
    with pytest.raises(InputError):
        build_test_net(1e-3)
    with pytest.raises(InputError):
        build_test_net(0.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.3, 1.0))
def test_test_net_interpolates_lipschitz_functions(cx, cy, eps):
    net = build_test_net(eps)
    c = np.array([cx, cy])

    def f(y):
        return np.maximum(0.0, np.minimum(1.5 - np.linalg.norm(y - c, axis=-1), 4.0 - np.linalg.norm(y, axis=-1)))

    y = np.random.default_rng(1).uniform(-2.5, 2.5, size=(200, 2))
    G = net(y)
    S = G.sum(axis=1)
    approx = G @ f(net.centers) / S
    assert np.abs(approx - f(y)).max() <= eps + 1e-12


def test_blowup_sequence_validation():
    with pytest.raises(InputError):
        BlowupSequence(LINE_SPEC, [0.0, 0.0], [0.5, 1.0], 1.0)
    with pytest.raises(InputError):
        BlowupSequence(LINE_SPEC, [0.0, 0.0], [1.0], 1.0, normalization="r")


def test_blowup_density_normalization():
    seq = BlowupSequence(LINE_SPEC, [0.0, 0.0], [1.0, 0.5, 0.25], 1.0, normalization="3^s k r^s")
    assert seq.k == pytest.approx(2.0, abs=0.02)
    mu = seq.measure(2)
    assert ball_mass(mu, [0.0, 0.0], 1.0) == pytest.approx(1 / 3, abs=0.01)


def test_blowup_outside_window_refused():
    mu = make_flat_measure(2, 1, [[1.0, 0.0]], [0.0, 0.0], 1.0, 2.0, 1e-3)
    seq = BlowupSequence(mu, [0.0, 0.0], [1.0], 1.0)
    with pytest.raises(TrustedWindowError):
        seq.measure(0)


def test_weak_diagnostic_flat_is_constant():
    seq = BlowupSequence(LINE_SPEC, [0.0, 0.0], 2.0 ** -np.arange(6), 1.0)
    rep = weak_convergence_diagnostic(seq, build_test_net(1.0))
    assert rep.moments.shape == (6, build_test_net(1.0).size)
    assert rep.cauchy_defect <= 0.02 * np.abs(rep.moments).max()
    assert not rep.diverging
    header, rows = rep.rows(seq.radii)
    assert header[0] == "r" and len(rows) == 6


def test_weak_diagnostic_atom_diverges():
    atom = make_atomic_measure([[0.0, 0.0]], [1.0])
    seq = BlowupSequence(atom, [0.0, 0.0], 2.0 ** -np.arange(6), 1.0)
    rep = weak_convergence_diagnostic(seq, build_test_net(1.0))
    assert rep.diverging
    np.testing.assert_allclose(rep.moments[:, :].max(axis=1), 2.0 ** np.arange(6) * rep.moments[0].max())


def test_weak_diagnostic_dimension_mismatch():
    seq = BlowupSequence(LINE_SPEC, [0.0, 0.0], [1.0], 1.0)
    with pytest.raises(InputError):
        weak_convergence_diagnostic(seq, build_test_net(2.0, d=3))


def test_tangent_experiment_flat_line():
    rep = tangent_symmetry_experiment(LINE_SPEC, riesz_kernel(2), [0.0, 0.0], [1.0, 0.5, 0.25], 1.0,
                                      net_epsilon=1.0)
    assert np.all(rep.blowup_defects < 1e-12)
    assert np.all(rep.sla_values < 1e-12)
    assert rep.correlation is None
    assert not rep.weak.diverging


def test_tangent_experiment_generic_lines():
    spec = MeasureSpec("lines", {"angles": [0.0, 0.9, 2.1], "center": [0.0, 0.0], "densities": 1.0,
                                 "R": 10.0, "h": 0.05}, h_ratio=40)
    rep = tangent_symmetry_experiment(spec, huovinen_kernel(3), [0.5, 0.0], [1.0, 0.7], 1.0)
    # both balls reach the other lines, so neither quantity vanishes
    assert np.all(rep.blowup_defects > 0.05)
    assert np.all(rep.sla_values > 0.05)
    assert rep.weak is None
    assert math.isfinite(rep.correlation)
