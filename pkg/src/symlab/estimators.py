"""Scikit-learn style wrappers around the measure functionals.

Each estimator is fitted on a measure, given either as an atom cloud ``X``
with ``sample_weight`` as atom masses, or directly as a
:class:`~symlab.measures.DiscreteMeasure` / :class:`~symlab.measures.MeasureSpec`.
``partial_fit`` appends atoms to an array-fitted measure, which allows a
measure to be streamed in chunks.  ``transform`` evaluates the functional at
query points, one row per point.

Examples
--------
>>> import numpy as np
>>> from symlab.estimators import DensityTransformer
>>> t = (np.arange(-2000, 2000) + 0.5) * 1e-3
>>> X = np.column_stack([t, np.zeros_like(t)])
>>> est = DensityTransformer(radii=[0.5, 0.25], s=1).fit(X, sample_weight=np.full(len(t), 1e-3))
>>> np.round(est.transform([[0.0, 0.0]]), 3)
array([[2., 2.]])
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import _check_sample_weight, check_array, check_is_fitted

from .functionals import density_scan, sla_scan, symmetry_defect
from .kernels import Kernel, kernel_from_config
from .measures import DiscreteMeasure, MeasureSpec, Window
from .transport import GOLDEN_ITERS, CandidateFamily, alpha_scan

__all__ = [
    "AlphaTransformer",
    "DensityTransformer",
    "SLATransformer",
    "SymmetryDefectTransformer",
]


class _MeasureMixin:
    """Fitting logic shared by every estimator: builds ``measure_``."""

    def fit(self, X, y=None, sample_weight=None):
        """Store the measure.

        Parameters
        ----------
        X : array-like of shape (n_atoms, d), DiscreteMeasure or MeasureSpec
            Atom positions, or a ready-made measure.
        y : ignored
        sample_weight : array-like of shape (n_atoms,), default=None
            Atom masses.  Unit masses when omitted.

        Returns
        -------
        self
        """
        for attr in ("measure_", "n_features_in_", "n_atoms_"):
            if hasattr(self, attr):
                delattr(self, attr)
        if isinstance(X, MeasureSpec):
            self.measure_ = X
            self.n_features_in_ = X.dim
            self.n_atoms_ = None
            return self
        if isinstance(X, DiscreteMeasure):
            self.measure_ = X
            self.n_features_in_ = X.dim
            self.n_atoms_ = X.n_atoms
            return self
        return self.partial_fit(X, y, sample_weight)

    def partial_fit(self, X, y=None, sample_weight=None):
        """Append the atoms ``X`` with masses ``sample_weight`` to the measure.

        Returns
        -------
        self
        """
        X = check_array(X, dtype=np.float64)
        w = _check_sample_weight(sample_weight, X, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("atom masses must be non-negative")
        if hasattr(self, "measure_"):
            if isinstance(self.measure_, MeasureSpec):
                raise ValueError("cannot append atoms to a generator-backed measure")
            if X.shape[1] != self.n_features_in_:
                raise ValueError(f"X has {X.shape[1]} features, the fitted measure has {self.n_features_in_}")
            old = self.measure_
            X = np.vstack([old.points, X])
            w = np.concatenate([old.weights, w])
        windows = () if self.window is None else (Window.ball(self.window[0], self.window[1]),)
        self.measure_ = DiscreteMeasure(X, w, self.resolution, {"generator": "estimator"}, windows)
        self.n_features_in_ = X.shape[1]
        self.n_atoms_ = X.shape[0]
        return self

    def _queries(self, Q):
        check_is_fitted(self, "measure_")
        Q = check_array(Q, dtype=np.float64)
        if Q.shape[1] != self.n_features_in_:
            raise ValueError(f"query points have {Q.shape[1]} coordinates, expected {self.n_features_in_}")
        return Q

    def _resolved_kernel(self):
        params = self.kernel_params
        if params is None and self.kernel == "riesz":
            params = {"d": self.n_features_in_}
        return _kernel(self.kernel, params)

    def _radii(self):
        if self.radii is None:
            raise ValueError("radii must be set before transforming")
        return np.asarray(self.radii, dtype=float)


def _kernel(kernel, params):
    if isinstance(kernel, Kernel):
        return kernel
    return kernel_from_config(kernel, **(params or {}))


class SLATransformer(_MeasureMixin, TransformerMixin, BaseEstimator):
    """Magnitude of the small local action at each query point and radius.

    Parameters
    ----------
    kernel : str or Kernel, default='riesz'
    kernel_params : dict, default=None
        Keyword arguments for the named kernel (``{'d': 2}`` for Riesz).
    radii : array-like, default=None
        Radius grid, required before ``transform``.
    tau : float, default=0.5
        Width of the radial window.
    s : float, default=1.0
    threshold_factor : float, default=10.0
        ``predict`` calls a point small when the tail magnitude is at most
        this multiple of the tail error estimate.
    resolution, window
        Grid spacing ``h`` and trusted ball ``(center, radius)`` of an
        array-fitted measure.
    """

    def __init__(self, kernel="riesz", kernel_params=None, radii=None, tau=0.5, s=1.0,
                 threshold_factor=10.0, resolution=0.0, window=None):
        self.kernel = kernel
        self.kernel_params = kernel_params
        self.radii = radii
        self.tau = tau
        self.s = s
        self.threshold_factor = threshold_factor
        self.resolution = resolution
        self.window = window

    def scans(self, Q):
        """One :class:`~symlab.functionals.ScanResult` per query point."""
        Q = self._queries(Q)
        k = self._resolved_kernel()
        return [sla_scan(self.measure_, k, q, self._radii(), self.tau, self.s,
                         threshold_factor=self.threshold_factor) for q in Q]

    def transform(self, Q):
        """Array of shape (n_queries, n_radii), radii in decreasing order."""
        return np.array([sc.magnitudes for sc in self.scans(Q)])

    def predict(self, Q):
        """Boolean verdict per point: tail consistent with a vanishing action."""
        return np.array([sc.verdict for sc in self.scans(Q)])


class SymmetryDefectTransformer(_MeasureMixin, TransformerMixin, BaseEstimator):
    """Normalized symmetry defect ``sup_r |int_B Omega(x - y) dmu| / r^s``.

    ``transform`` returns shape (n_queries, 2): the defect and its
    discretization error estimate.  ``predict`` flags points whose defect is
    within ``factor`` error estimates of zero.
    """

    def __init__(self, kernel="riesz", kernel_params=None, radii=None, s=1.0, factor=3.0,
                 resolution=0.0, window=None):
        self.kernel = kernel
        self.kernel_params = kernel_params
        self.radii = radii
        self.s = s
        self.factor = factor
        self.resolution = resolution
        self.window = window

    def transform(self, Q):
        Q = self._queries(Q)
        k = self._resolved_kernel()
        out = []
        for q in Q:
            d, info = symmetry_defect(self.measure_, k, q, self._radii(), self.s, full_output=True)
            out.append((d, info["error_estimate"]))
        return np.array(out)

    def predict(self, Q):
        D = self.transform(Q)
        return D[:, 0] <= np.maximum(self.factor * D[:, 1], 1e-12)


class DensityTransformer(_MeasureMixin, TransformerMixin, BaseEstimator):
    """Density ratios ``mu(B(x, r)) / r^s``, shape (n_queries, n_radii)."""

    def __init__(self, radii=None, s=1.0, resolution=0.0, window=None):
        self.radii = radii
        self.s = s
        self.resolution = resolution
        self.window = window

    def transform(self, Q):
        Q = self._queries(Q)
        return np.array([density_scan(self.measure_, q, self._radii(), self.s).magnitudes for q in Q])


class AlphaTransformer(_MeasureMixin, TransformerMixin, BaseEstimator):
    """Alpha numbers against a candidate family.

    Parameters
    ----------
    family : {'flat', 'spike', 'zero'} or CandidateFamily, default='flat'
    family_params : dict, default=None
        Keyword arguments of the family constructor (``{'k': 3}`` for spikes).
    radii : array-like, default=None
    s : float, default=1.0
    threshold : float, default=0.02
        ``predict`` calls a point flat (or symmetric) when the tail is at
        most this value.
    golden_iters : int, default=6
    """

    def __init__(self, family="flat", family_params=None, radii=None, s=1.0, threshold=0.02,
                 golden_iters=GOLDEN_ITERS, resolution=0.0, window=None):
        self.family = family
        self.family_params = family_params
        self.radii = radii
        self.s = s
        self.threshold = threshold
        self.golden_iters = golden_iters
        self.resolution = resolution
        self.window = window

    def _family(self):
        if isinstance(self.family, CandidateFamily):
            return self.family
        ctor = {"flat": CandidateFamily.flat, "spike": CandidateFamily.spike,
                "zero": CandidateFamily.zero}.get(self.family)
        if ctor is None:
            raise ValueError(f"unknown family {self.family!r}")
        return ctor(**(self.family_params or {}))

    def scans(self, Q):
        Q = self._queries(Q)
        fam = self._family()
        return [alpha_scan(self.measure_, q, self._radii(), self.s, fam, self.threshold,
                           golden_iters=self.golden_iters) for q in Q]

    def transform(self, Q):
        return np.array([sc.magnitudes for sc in self.scans(Q)])

    def predict(self, Q):
        return np.array([sc.verdict for sc in self.scans(Q)])
