import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symlab.errors import InputError
from symlab.measures import MeasureSpec, make_atomic_measure, make_flat_measure, zero_measure
from symlab.transport import (CandidateFamily, LipschitzDualInstance, alpha_flat, alpha_general, alpha_scan,
                              audit_solution, brute_force_dual_value, build_instance, c_coefficient,
                              lipschitz_dual_value, random_instance, scaling_invariance_check)

X0 = np.zeros(2)


def line(angle=0.0, h=1 / 400, R=10.0):
    return make_flat_measure(2, 1, [[math.cos(angle), math.sin(angle)]], [0.0, 0.0], 1.0, R, h)


def inst(points, coefs, r=1.0, s=1.0):
    return LipschitzDualInstance(X0, r, s, np.asarray(points, float).reshape(-1, 2), coefs)


# ------------------------------------------------------------- instances


def test_c_coefficient_examples():
    mu = make_atomic_measure([[0.5, 0.0], [0.0, 1.0]], [1.0, 2.0])
    assert c_coefficient(mu, mu, X0, 1.0) == 1.0
    assert c_coefficient(mu, mu.scaled(2.0), X0, 1.0) == 0.5
    assert c_coefficient(mu, zero_measure(2), X0, 1.0) == 0.0


def test_build_instance_examples():
    mu = make_atomic_measure([[0.5, 0.0], [0.0, 1.0]], [1.0, 2.0])
    assert build_instance(mu, mu, X0, 1.0, 1.0).n == 0
    one = build_instance(make_atomic_measure([X0], [1.0]), zero_measure(2), X0, 1.0, 1.0)
    assert one.n == 1
    assert one.coefficients[0] == 1.0
    far = make_atomic_measure([[5.0, 0.0], [1.0, 0.0]], [1.0, 1.0])
    assert build_instance(far, zero_measure(2), X0, 1.0, 1.0).n == 1


def test_instance_rejects_entries_outside_ball():
    with pytest.raises(InputError):
        inst([[4.0, 0.0]], [1.0])


# ---------------------------------------------------------------- solvers


def test_dual_value_examples():
    assert lipschitz_dual_value(inst([[0.0, 0.0]], [1.0])).value == pytest.approx(4.0)
    assert lipschitz_dual_value(inst([[1.0, 0.0], [-1.0, 0.0]], [1.0, -1.0])).value == pytest.approx(2.0)
    assert lipschitz_dual_value(inst(np.zeros((0, 2)), [])).value == 0.0


def test_brute_force_examples():
    assert brute_force_dual_value(inst([[0.0, 0.0]], [-2.5])) == pytest.approx(10.0)
    assert brute_force_dual_value(inst([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])) == 0.0
    with pytest.raises(InputError):
        brute_force_dual_value(random_instance(np.random.default_rng(0), 7))


def test_value_scales_with_radius_power():
    a = inst([[1.0, 0.0], [-1.0, 0.0]], [1.0, -1.0], r=2.0, s=1.5)
    # positions are measured in units of r
    assert lipschitz_dual_value(a).raw_value == pytest.approx(1.0)
    assert lipschitz_dual_value(a).value == pytest.approx(1.0 / 2.0**1.5)


@pytest.mark.parametrize("seed", range(5))
def test_network_simplex_matches_direct_lp(seed):
    rng = np.random.default_rng(seed)
    I = random_instance(rng, 120)
    direct = lipschitz_dual_value(I, n_exact=1000)
    network = lipschitz_dual_value(I, n_exact=0)
    assert direct.method == "exact-lp"
    assert network.method == "network-simplex"
    assert network.value == pytest.approx(direct.value, rel=1e-9, abs=1e-9)
    assert min(audit_solution(I, network.f_values).values()) >= -1e-10


def test_one_signed_shortcut_matches_lp():
    rng = np.random.default_rng(3)
    I = random_instance(rng, 40)
    pos = LipschitzDualInstance(I.center, I.r, I.s, I.positions, np.abs(I.coefficients))
    fast = lipschitz_dual_value(pos)
    assert fast.method == "one-signed"
    assert fast.value == pytest.approx(float(np.abs(I.coefficients) @ I.bounds), rel=1e-15)
    # same number from the simplex on a perturbed instance with one tiny negative entry
    coefs = np.abs(I.coefficients).copy()
    coefs[0] = -1e-13
    slow = lipschitz_dual_value(LipschitzDualInstance(I.center, I.r, I.s, I.positions, coefs))
    assert slow.method == "exact-lp"
    expected = fast.value - abs(I.coefficients[0]) * I.bounds[0]
    assert slow.value == pytest.approx(expected, rel=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.floats(0.3, 3.0), st.floats(0.5, 2.0))
def test_lp_matches_brute_force(seed, n, r, s):
    I = random_instance(np.random.default_rng(seed), n, r=r, s=s)
    assert abs(lipschitz_dual_value(I).value - brute_force_dual_value(I)) <= 1e-9


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.floats(0.1, 10.0))
def test_dual_value_homogeneous_and_symmetric(seed, n, lam):
    I = random_instance(np.random.default_rng(seed), n)
    v = lipschitz_dual_value(I).value
    assert lipschitz_dual_value(I.scaled(lam)).value == pytest.approx(lam * v, rel=1e-9, abs=1e-12)
    assert lipschitz_dual_value(I.scaled(-1.0)).value == pytest.approx(v, rel=1e-9, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_dual_value_subadditive(seed, n):
    rng = np.random.default_rng(seed)
    I = random_instance(rng, n)
    J = LipschitzDualInstance(I.center, I.r, I.s, I.positions, rng.normal(size=n))
    K = LipschitzDualInstance(I.center, I.r, I.s, I.positions, I.coefficients + J.coefficients)
    total = lipschitz_dual_value(I).value + lipschitz_dual_value(J).value
    assert lipschitz_dual_value(K).value <= total + 1e-9


# ------------------------------------------------------------------ alpha


def test_alpha_flat_line_matches_itself():
    res = alpha_flat(line(math.pi / 6), X0, 1.0, 1)
    assert res.value <= 0.02
    assert res.candidate["kind"] == "flat"


def test_alpha_flat_orthogonal_plane_is_far():
    res = alpha_flat(line(0.0, h=1 / 100), X0, 1.0, 1, sampling={"angles": [math.pi / 2], "refine": False},
                     h_ratio=100)
    assert res.value >= 0.1


def test_alpha_single_atom_positive():
    atom = make_atomic_measure([X0], [1.0])
    res = alpha_flat(atom, X0, 1.0, 1, sampling={"n_angles": 12})
    assert res.value > 0.1
    assert res.lower_bound <= res.value


def test_alpha_general_flat_family_equals_alpha_flat():
    mu = make_atomic_measure([[0.2, 0.1], [-0.5, 0.3], [0.1, -0.9]], [0.4, 0.3, 0.5])
    sampling = {"n_angles": 8, "refine": False}
    a = alpha_flat(mu, X0, 1.0, 1, sampling=sampling, h_ratio=40)
    b = alpha_general(mu, X0, 1.0, 1, CandidateFamily.flat(include_zero=False, h_ratio=40, **sampling))
    assert a.value == pytest.approx(b.value, abs=1e-6)


def test_zero_family_closed_form():
    mu = make_atomic_measure([[0.2, 0.1], [-0.5, 3.3]], [0.4, 0.3])
    res = alpha_general(mu, X0, 1.0, 1.0, CandidateFamily.zero())
    b = 4.0 - np.linalg.norm(mu.points, axis=1)
    phi = np.array([1.0, 1.0 - (lambda u: u**3 * (10 - 15 * u + 6 * u * u))(np.hypot(0.5, 3.3) - 3.0)])
    assert res.value == pytest.approx(float((phi * mu.weights) @ b), rel=1e-12)
    assert res.solution.method == "one-signed"


def test_explicit_family_contains_measure():
    mu = make_atomic_measure([[0.2, 0.1], [-0.5, 0.3]], [0.4, 0.3])
    res = alpha_general(mu, X0, 1.0, 1.0, CandidateFamily.explicit([mu.scaled(3.0)], include_zero=False))
    assert res.value == pytest.approx(0.0, abs=1e-15)


def test_alpha_scan_columns():
    sc = alpha_scan(line(), X0, [1.0, 0.5], 1, CandidateFamily.flat(include_zero=False, n_angles=12))
    assert sc.header()[:3] == ["r", "alpha", "quad_error_estimate"]
    assert "alpha_lower" in sc.columns
    assert sc.verdict


def test_alpha_refuses_untrusted_window():
    with pytest.raises(InputError):
        alpha_flat(line(R=3.0), X0, 1.0, 1)


def test_spike_family_validation():
    with pytest.raises(InputError):
        CandidateFamily.spike(4)
    with pytest.raises(InputError):
        CandidateFamily.spike(3, ms=[2])


@pytest.mark.slow
def test_spike_needs_more_than_lines():
    spike = MeasureSpec("spike", {"k": 3, "m": 3, "angle": 0.0, "center": [0.0, 0.0], "c": 1.0, "R": 40.0,
                                  "h": 1 / 200}, h_ratio=200)
    lines_only = CandidateFamily.spike(3, ms=[1], include_zero=False)
    res = alpha_general(spike, X0, 1.0, 1.0, lines_only, rel_tol=0.1)
    assert res.lower_bound >= 0.05


# ------------------------------------------------------------- scaling


@pytest.mark.parametrize("x,r", [((0.0, 0.0), 1.0), ((0.5, -0.2), 0.35)])
def test_scaling_invariance_atoms(x, r):
    mu = MeasureSpec("atoms", {"points": [[0.0, 0.0], [0.3, 0.1], [-0.5, 0.9], [1.2, -0.7]],
                               "weights": [1.0, 0.5, 2.0, 0.25]})
    fam = CandidateFamily.flat(n_angles=12, h_ratio=20)
    chk = scaling_invariance_check(mu, np.array(x), r, 1.0, fam)
    assert chk.gap <= 1e-8
    assert chk.lhs > 0
