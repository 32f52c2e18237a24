"""Estimator-style front end for box-counting dimension."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import InvalidInputError, check_points
from .counting import box_counts, estimate_box_dimensions
from .geometry import Ball, Segment


class BoxCountingDimension(BaseEstimator):
    """Lower/upper box-dimension proxies from dyadic mesh counts.

    ``fit`` accepts a point cloud of shape ``(n, d)`` or any geometry that
    ``rasterize`` understands (a Ball, a Segment or a list of Segments).

    Parameters
    ----------
    scales : sequence of int
        Exponents ``j``; meshes of side ``2**-j`` are used.
    finest_fraction : float
        Share of the finest two-point slopes used for the lower/upper proxies.
    origin : sequence of float or None
        Mesh anchor, zero when omitted.
    """

    def __init__(self, scales=tuple(range(3, 11)), finest_fraction=0.5, origin=None):
        self.scales = scales
        self.finest_fraction = finest_fraction
        self.origin = origin

    def fit(self, X, y=None):
        scales = sorted(int(j) for j in self.scales)
        if len(set(scales)) < 3:
            raise InvalidInputError("need at least 3 distinct scales")
        if isinstance(X, (Ball, Segment)) or (isinstance(X, list) and X and isinstance(X[0], Segment)):
            geometry = X
            d = (X[0] if isinstance(X, list) else X).d
        else:
            geometry = check_points(X)
            d = geometry.shape[1]
        counts = box_counts(geometry, [2.0 ** -j for j in scales], d, self.origin)
        est = estimate_box_dimensions(counts, self.finest_fraction)
        self.counts_ = np.array(counts)
        self.slopes_ = est.slopes
        self.lower_ = est.lower
        self.upper_ = est.upper
        self.lsq_slope_ = est.lsq_slope
        self.n_features_in_ = d
        return self

    def estimate(self) -> tuple[float, float]:
        check_is_fitted(self, "slopes_")
        return self.lower_, self.upper_
