import doctest

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import symlab.estimators
from symlab.estimators import AlphaTransformer, DensityTransformer, SLATransformer, SymmetryDefectTransformer
from symlab.kernels import huovinen_kernel
from symlab.measures import MeasureSpec, make_flat_measure

T = (np.arange(-4000, 4000) + 0.5) * 1e-3
LINE_X = np.column_stack([T, np.zeros_like(T)])
LINE_W = np.full(len(T), 1e-3)


def test_module_doctest():
    res = doctest.testmod(symlab.estimators)
    assert res.attempted > 0
    assert res.failed == 0


def test_partial_fit_matches_fit():
    whole = DensityTransformer(radii=[1.0, 0.3]).fit(LINE_X, sample_weight=LINE_W)
    parts = DensityTransformer(radii=[1.0, 0.3])
    for chunk in np.array_split(np.arange(len(T)), 3):
        parts.partial_fit(LINE_X[chunk], sample_weight=LINE_W[chunk])
    assert parts.n_atoms_ == len(T)
    Q = [[0.0, 0.0], [1.0, 0.0]]
    np.testing.assert_array_equal(whole.transform(Q), parts.transform(Q))


def test_fit_resets_state():
    est = DensityTransformer(radii=[1.0]).fit(LINE_X, sample_weight=LINE_W)
    est.fit(LINE_X[:10])
    assert est.n_atoms_ == 10


def test_unfitted_and_bad_input():
    with pytest.raises(NotFittedError):
        DensityTransformer(radii=[1.0]).transform([[0.0, 0.0]])
    est = DensityTransformer(radii=[1.0]).fit(LINE_X)
    with pytest.raises(ValueError):
        est.transform([[0.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        est.partial_fit(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        DensityTransformer(radii=[1.0]).fit(LINE_X[:2], sample_weight=[1.0, -1.0])
    with pytest.raises(ValueError):
        DensityTransformer().fit(LINE_X).transform([[0.0, 0.0]])


def test_clone_keeps_params():
    est = SLATransformer(kernel="huovinen", kernel_params={"k": 3}, radii=[1.0], tau=0.3)
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_sla_transformer_flat_line():
    est = SLATransformer(radii=[1.0, 0.5, 0.25], resolution=1e-3, window=([0.0, 0.0], 4.0))
    est.fit(LINE_X, sample_weight=LINE_W)
    out = est.transform([[0.0, 0.0], [0.5, 0.0]])
    assert out.shape == (2, 3)
    assert np.abs(out).max() < 1e-12
    assert est.predict([[0.0, 0.0]]).tolist() == [True]


def test_sla_transformer_on_spec():
    spec = MeasureSpec("lines", {"angles": [0.0, 0.9, 2.1], "center": [0.0, 0.0], "densities": 1.0,
                                 "R": 10.0, "h": 0.05}, h_ratio=40)
    est = SLATransformer(kernel=huovinen_kernel(3), radii=[2.0, 1.0], s=1.0).fit(spec)
    assert est.n_atoms_ is None
    assert est.transform([[0.5, 0.0]]).min() >= 0.05
    with pytest.raises(ValueError):
        est.partial_fit(LINE_X)


def test_defect_transformer():
    mu = make_flat_measure(2, 1, [[1.0, 0.0]], [0.0, 0.0], 1.0, 5.0, 1e-3)
    est = SymmetryDefectTransformer(radii=np.geomspace(1.0, 0.1, 5)).fit(mu)
    D = est.transform([[0.0, 0.0], [0.0, 0.5]])
    assert D.shape == (2, 2)
    assert D[0, 0] < 1e-12
    assert D[1, 0] > 0.1
    assert est.predict([[0.0, 0.0], [0.0, 0.5]]).tolist() == [True, False]


def test_alpha_transformer():
    mu = make_flat_measure(2, 1, [[1.0, 0.0]], [0.0, 0.0], 1.0, 10.0, 2.5e-3)
    est = AlphaTransformer(family_params={"n_angles": 12, "include_zero": False}, radii=[1.0, 0.5]).fit(mu)
    A = est.transform([[0.0, 0.0]])
    assert A.shape == (1, 2)
    assert A.max() <= 0.02
    assert est.predict([[0.0, 0.0]]).tolist() == [True]
    with pytest.raises(ValueError):
        AlphaTransformer(family="circle", radii=[1.0]).fit(mu).transform([[0.0, 0.0]])
