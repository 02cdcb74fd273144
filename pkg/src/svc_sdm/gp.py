"""Exponential-correlation Gaussian process machinery.

Provides the dense reference implementation plus the sparse
nearest-neighbor approximation used everywhere else: construction of the
sequential conditional factorization, log densities, simulation, and
kriging prediction.  With ``m >= J - 1`` the sparse factorization is the
dense process exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import _kernels as _k
from .data import SpatialCoordinates


class NumericError(RuntimeError):
    """Raised when a conditional covariance is numerically singular."""


@dataclass(frozen=True)
class SpatialParams:
    sigma2: float
    phi: float

    def __post_init__(self):
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError("sigma2 must be finite and > 0")
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise ValueError("phi must be finite and > 0")


@dataclass(frozen=True)
class GPSurface:
    values: np.ndarray
    params: SpatialParams

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ValueError("surface values must be a finite vector")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


def exp_correlation(d, phi):
    """exp(-phi * d); strictly decreasing in distance and in decay."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("distances must be non-negative")
    if phi <= 0:
        raise ValueError("phi must be > 0")
    out = np.exp(-phi * d)
    return float(out) if out.ndim == 0 else out


def _as_xy(coords) -> np.ndarray:
    if isinstance(coords, SpatialCoordinates):
        return np.asarray(coords.xy, dtype=np.float64)
    xy = np.asarray(coords, dtype=np.float64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ValueError("coordinates must have shape (J, 2)")
    return xy


def dense_covariance(coords, params: SpatialParams) -> np.ndarray:
    xy = _as_xy(coords)
    return params.sigma2 * np.exp(-params.phi * cdist(xy, xy))


def dense_log_density(values, coords, params: SpatialParams) -> float:
    """Dense zero-mean GP log density via Cholesky (reference path)."""
    w = np.asarray(values, dtype=np.float64)
    cov = dense_covariance(coords, params)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise NumericError(str(e)) from e
    alpha = np.linalg.solve(chol, w)
    return float(-0.5 * (w.size * np.log(2 * np.pi)
                         + 2 * np.log(np.diag(chol)).sum()
                         + alpha @ alpha))


@dataclass(frozen=True)
class NNGPStructure:
    """Sequential conditional factorization of the GP at the data sites.

    Ordered-frame arrays: position i in the ordering refers to original
    site ``site_of_ord[i]``; ``nbr[i]`` indexes earlier ordered positions.
    """

    site_of_ord: np.ndarray   # (J,)
    ord_of_site: np.ndarray   # (J,)
    nbr: np.ndarray           # (J, M) ordered-frame neighbor indices
    nbr_count: np.ndarray     # (J,)
    weights: np.ndarray       # (J, M) conditional coefficients b_j
    ftilde: np.ndarray        # (J,) unit-variance conditional variances
    nbr_dmat: np.ndarray      # (J, M, M) neighbor pairwise distances
    nbr_dvec: np.ndarray      # (J, M) site-to-neighbor distances
    params: SpatialParams
    m: int

    @property
    def n_sites(self) -> int:
        return self.site_of_ord.shape[0]

    @property
    def f(self) -> np.ndarray:
        """Actual conditional variances sigma2 * f~."""
        return self.params.sigma2 * self.ftilde


def nngp_ordering(coords) -> np.ndarray:
    """Visit order: ascending easting+northing, stable in input order."""
    xy = _as_xy(coords)
    return np.argsort(xy[:, 0] + xy[:, 1], kind="stable")


def _neighbor_geometry(xy_ord: np.ndarray, m: int):
    j = xy_ord.shape[0]
    mm = min(m, max(j - 1, 0))
    nbr = np.zeros((j, mm), dtype=np.int64)
    count = np.zeros(j, dtype=np.int64)
    if mm > 0:
        _k.nearest_prev_neighbors(xy_ord, mm, nbr, count)
    nxy = xy_ord[nbr]  # (J, M, 2); padded slots point at site 0, never read
    dvec = np.sqrt(((xy_ord[:, None, :] - nxy) ** 2).sum(axis=2))
    dmat = np.sqrt(((nxy[:, :, None, :] - nxy[:, None, :, :]) ** 2).sum(axis=3))
    return nbr, count, dmat, dvec


def _weights_for_phi(dmat, dvec, count, phi):
    j, mm = dvec.shape
    b = np.zeros((j, mm))
    ftilde = np.ones(j)
    r_buf = np.empty((max(mm, 1), max(mm, 1)))
    v_buf = np.empty(max(mm, 1))
    if _k.nngp_weights_kernel(dmat, dvec, count, phi, b, ftilde, r_buf, v_buf) != 0:
        raise NumericError("singular neighbor covariance (coincident sites?)")
    return b, ftilde


def build_nngp(coords, m: int, params: SpatialParams) -> NNGPStructure:
    """Ordered neighbor sets plus conditional weights/variances.

    Cost is O(J * (m^3 + m * J)) from the exhaustive neighbor search and
    the per-site m x m solves; no O(J^3) dense factorization is formed.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    xy = _as_xy(coords)
    order = nngp_ordering(xy)
    xy_ord = np.ascontiguousarray(xy[order])
    nbr, count, dmat, dvec = _neighbor_geometry(xy_ord, m)
    b, ftilde = _weights_for_phi(dmat, dvec, count, params.phi)
    ord_of_site = np.empty_like(order)
    ord_of_site[order] = np.arange(order.shape[0])
    return NNGPStructure(order, ord_of_site, nbr, count, b, ftilde,
                         dmat, dvec, params, m)


def _values_of(surface) -> np.ndarray:
    return surface.values if isinstance(surface, GPSurface) else np.asarray(surface, dtype=np.float64)


def nngp_log_density(surface, struct: NNGPStructure) -> float:
    """Sum of the sequential conditional normal log densities."""
    w = _values_of(surface)
    if w.shape[0] != struct.n_sites:
        raise ValueError("surface length does not match structure")
    quad, logdet = _k.nngp_quad_logdet(
        w, struct.site_of_ord, struct.nbr, struct.nbr_count,
        struct.weights, struct.ftilde)
    s2 = struct.params.sigma2
    j = struct.n_sites
    return float(-0.5 * (j * np.log(2 * np.pi * s2) + logdet + quad / s2))


def nngp_simulate(struct: NNGPStructure, rng: np.random.Generator) -> GPSurface:
    """Sequential conditional draw; mean zero with the implied covariance."""
    j = struct.n_sites
    noise = rng.standard_normal(j) * np.sqrt(struct.f)
    w = np.zeros(j)
    site = struct.site_of_ord
    for i in range(j):
        c = struct.nbr_count[i]
        mean = struct.weights[i, :c] @ w[site[struct.nbr[i, :c]]] if c else 0.0
        w[site[i]] = mean + noise[i]
    return GPSurface(w, struct.params)


def krige_predict(new_coords, observed, coords, m: int, params: SpatialParams):
    """Conditional mean and variance at new sites from the m nearest observed.

    A new site coinciding with an observed one returns that value with
    variance zero.
    """
    w = _values_of(observed)
    xy = _as_xy(coords)
    new_xy = _as_xy(new_coords)
    j = xy.shape[0]
    if j < m:
        raise ValueError(f"need at least m={m} observed sites, have {j}")
    dist = cdist(new_xy, xy)
    mean = np.empty(new_xy.shape[0])
    var = np.empty(new_xy.shape[0])
    for i in range(new_xy.shape[0]):
        d = dist[i]
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            mean[i] = w[hit[0]]
            var[i] = 0.0
            continue
        sel = np.lexsort((np.arange(j), d))[:m]
        r = np.exp(-params.phi * d[sel])
        corr = np.exp(-params.phi * cdist(xy[sel], xy[sel]))
        try:
            b = np.linalg.solve(corr, r)
        except np.linalg.LinAlgError as e:
            raise NumericError(str(e)) from e
        mean[i] = b @ w[sel]
        var[i] = params.sigma2 * max(1.0 - r @ b, 0.0)
    return mean, var


def neighbor_children(struct: NNGPStructure):
    """Reverse adjacency: for each ordered site, who lists it as a neighbor.

    Returns CSR arrays (child_ptr, child_ord, child_slot) over ordered
    positions; used by the sequential Gibbs surface update.
    """
    j = struct.n_sites
    counts = np.zeros(j, dtype=np.int64)
    for i in range(j):
        for a in range(struct.nbr_count[i]):
            counts[struct.nbr[i, a]] += 1
    ptr = np.zeros(j + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    child_ord = np.zeros(ptr[-1], dtype=np.int64)
    child_slot = np.zeros(ptr[-1], dtype=np.int64)
    fill = ptr[:-1].copy()
    for i in range(j):
        for a in range(struct.nbr_count[i]):
            parent = struct.nbr[i, a]
            child_ord[fill[parent]] = i
            child_slot[fill[parent]] = a
            fill[parent] += 1
    return ptr, child_ord, child_slot
