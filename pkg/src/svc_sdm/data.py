"""Detection-nondetection data types, validation, and long-CSV ingest.

The canonical in-memory layout is a dense ``(J, T, K)`` float array of
0/1 observations with NaN marking missing replicates.  Sites are ordered
by identifier and seasons ascending, so ingest is invariant to row order
in the input file.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist


class IngestError(ValueError):
    """Raised when an input file violates the long-CSV contract."""


class DataValidationError(ValueError):
    """Raised when constructed data types violate their invariants."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpatialCoordinates:
    """Per-site planar coordinates with unique string identifiers."""

    site_ids: tuple[str, ...]
    xy: np.ndarray  # (J, 2) easting/northing

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise DataValidationError("coordinates must have shape (J, 2)")
        if len(self.site_ids) != xy.shape[0]:
            raise DataValidationError("site_ids and coordinates length mismatch")
        if not np.all(np.isfinite(xy)):
            raise DataValidationError("all coordinates must be finite")
        if len(set(self.site_ids)) != len(self.site_ids):
            raise DataValidationError("site identifiers must be unique")
        pairs = {(x, y) for x, y in map(tuple, xy)}
        if len(pairs) != xy.shape[0]:
            raise DataValidationError("duplicate site coordinates are not allowed")
        object.__setattr__(self, "site_ids", tuple(str(s) for s in self.site_ids))
        object.__setattr__(self, "xy", _freeze(xy))

    @property
    def n_sites(self) -> int:
        return self.xy.shape[0]

    def distance_range(self) -> tuple[float, float]:
        """(min, max) inter-site Euclidean distance; (1.0, 1.0) for J=1."""
        if self.n_sites < 2:
            return 1.0, 1.0
        d = pdist(self.xy)
        return float(d.min()), float(d.max())


@dataclass(frozen=True)
class DetectionData:
    """Replicated detection/nondetection observations.

    ``y[j, t, k]`` is 0/1 or NaN for a missing replicate.  Ragged
    replicate counts and unsampled site-seasons are represented by NaN.
    """

    y: np.ndarray  # (J, T, K) float64 in {0, 1, NaN}
    coords: SpatialCoordinates
    season_labels: tuple[int, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 3:
            raise DataValidationError("y must have shape (J, T, K)")
        j, t, k = y.shape
        if j < 1 or t < 1 or k < 1:
            raise DataValidationError("need J >= 1, T >= 1, K >= 1")
        if j != self.coords.n_sites:
            raise DataValidationError("y and coordinates disagree on J")
        obs = y[np.isfinite(y)]
        if not np.all((obs == 0.0) | (obs == 1.0)):
            raise DataValidationError("observations must be 0, 1, or missing")
        per_site = np.isfinite(y).any(axis=(1, 2))
        if not per_site.all():
            bad = [self.coords.site_ids[i] for i in np.nonzero(~per_site)[0]]
            raise DataValidationError(
                f"sites with no non-missing observation: {bad}"
            )
        labels = self.season_labels or tuple(range(1, t + 1))
        if len(labels) != t:
            raise DataValidationError("season_labels length must equal T")
        object.__setattr__(self, "season_labels", tuple(int(s) for s in labels))
        object.__setattr__(self, "y", _freeze(y))

    @property
    def n_sites(self) -> int:
        return self.y.shape[0]

    @property
    def n_seasons(self) -> int:
        return self.y.shape[1]

    @property
    def max_replicates(self) -> int:
        return self.y.shape[2]

    @property
    def sampled_mask(self) -> np.ndarray:
        """(J, T) bool: site-season has at least one non-missing replicate."""
        return np.isfinite(self.y).any(axis=2)

    def seasons_sampled(self, j: int) -> tuple[int, ...]:
        mask = self.sampled_mask[j]
        return tuple(self.season_labels[t] for t in np.nonzero(mask)[0])


@dataclass(frozen=True)
class CovariateSet:
    """Occurrence (site-season) and detection (site-season-replicate) covariates."""

    occurrence: dict[str, np.ndarray] = field(default_factory=dict)
    detection: dict[str, np.ndarray] = field(default_factory=dict)
    strata: np.ndarray | None = None  # (J,) int labels in 1..S
    transforms: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        occ = {k: _freeze(np.asarray(v, dtype=np.float64)) for k, v in self.occurrence.items()}
        det = {k: _freeze(np.asarray(v, dtype=np.float64)) for k, v in self.detection.items()}
        for name, arr in occ.items():
            if arr.ndim != 2:
                raise DataValidationError(f"occurrence covariate {name!r} must be (J, T)")
        for name, arr in det.items():
            if arr.ndim != 3:
                raise DataValidationError(f"detection covariate {name!r} must be (J, T, K)")
        object.__setattr__(self, "occurrence", occ)
        object.__setattr__(self, "detection", det)
        if self.strata is not None:
            s = np.asarray(self.strata)
            if s.ndim != 1:
                raise DataValidationError("strata must be a (J,) vector")
            if not np.issubdtype(s.dtype, np.integer):
                if not np.all(s == np.floor(s)):
                    raise DataValidationError("stratum labels must be integers")
                s = s.astype(np.int64)
            if s.min(initial=1) < 1:
                raise DataValidationError("stratum labels must be >= 1")
            object.__setattr__(self, "strata", _freeze(s.astype(np.int64)))

    @property
    def n_strata(self) -> int:
        return 0 if self.strata is None else int(self.strata.max())

    def check_complete(self, data: DetectionData) -> list[str]:
        """Covariates must be present wherever an observation exists."""
        errors = []
        sampled = data.sampled_mask
        present = np.isfinite(data.y)
        for name, arr in self.occurrence.items():
            if arr.shape != sampled.shape:
                errors.append(f"occurrence covariate {name!r} has shape {arr.shape}, expected {sampled.shape}")
                continue
            if not np.all(np.isfinite(arr[sampled])):
                errors.append(f"occurrence covariate {name!r} missing at a sampled site-season")
        for name, arr in self.detection.items():
            if arr.shape != data.y.shape:
                errors.append(f"detection covariate {name!r} has shape {arr.shape}, expected {data.y.shape}")
                continue
            if not np.all(np.isfinite(arr[present])):
                errors.append(f"detection covariate {name!r} missing at an observed replicate")
        if self.strata is not None:
            if self.strata.shape[0] != data.n_sites:
                errors.append("strata vector length must equal J")
            else:
                labels = set(self.strata.tolist())
                expected = set(range(1, self.n_strata + 1))
                missing = sorted(expected - labels)
                if missing:
                    errors.append(f"empty strata: {missing}")
        return errors


@dataclass(frozen=True)
class ColumnSchema:
    """Column-name map for the long-CSV ingest format."""

    site: str = "site_id"
    easting: str = "easting"
    northing: str = "northing"
    season: str = "season"
    replicate: str = "replicate"
    y: str = "y"
    occurrence: tuple[str, ...] = ()
    detection: tuple[str, ...] = ()
    stratum: str | None = None


def _err_rows(idx) -> str:
    # +2: header line plus 1-based counting
    return ", ".join(str(i + 2) for i in idx)


def ingest_long_csv(
    path,
    schema: ColumnSchema | None = None,
    standardize: bool = True,
) -> tuple[DetectionData, CovariateSet]:
    """Read a long ("tidy") detection CSV into validated data types.

    One row per (site, season, replicate) observation; absent rows become
    missing replicates.  Covariates are standardized to mean 0, sd 1 by
    default, with the transform recorded in ``CovariateSet.transforms``.
    """
    schema = schema or ColumnSchema()
    df = pd.read_csv(path)
    required = [schema.site, schema.easting, schema.northing, schema.season,
                schema.replicate, schema.y]
    covcols = list(schema.occurrence) + list(schema.detection)
    if schema.stratum:
        covcols.append(schema.stratum)
    missing_cols = [c for c in required + covcols if c not in df.columns]
    if missing_cols:
        raise IngestError(f"missing columns: {missing_cols}")
    if len(df) == 0:
        raise IngestError("empty file")

    for col in [schema.easting, schema.northing, schema.season, schema.replicate,
                schema.y] + covcols:
        vals = pd.to_numeric(df[col], errors="coerce")
        bad = df.index[vals.isna() & df[col].notna()]
        if len(bad):
            raise IngestError(f"non-numeric value in column {col!r} at row(s) {_err_rows(bad)}")
        if vals.isna().any():
            raise IngestError(
                f"missing value in column {col!r} at row(s) {_err_rows(df.index[vals.isna()])}; "
                "omit rows for missing replicates instead"
            )
        df[col] = vals

    key = [schema.site, schema.season, schema.replicate]
    dup = df.index[df.duplicated(subset=key, keep=False)]
    if len(dup):
        first = df.loc[dup[0], key].tolist()
        raise IngestError(
            f"duplicate (site, season, replicate) rows at row(s) {_err_rows(dup)}: {first}"
        )

    bad_y = df.index[~df[schema.y].isin([0.0, 1.0])]
    if len(bad_y):
        raise IngestError(f"y outside {{0, 1}} at row(s) {_err_rows(bad_y)}")
    if (df[schema.replicate] < 1).any() or (df[schema.replicate] % 1 != 0).any():
        raise IngestError("replicate indices must be positive integers")
    if (df[schema.season] % 1 != 0).any():
        raise IngestError("season labels must be integers")

    df["_site"] = df[schema.site].astype(str)
    site_ids = sorted(df["_site"].unique())
    site_pos = {s: i for i, s in enumerate(site_ids)}
    season_labels = sorted(int(s) for s in df[schema.season].unique())
    season_pos = {s: i for i, s in enumerate(season_labels)}
    n_j, n_t = len(site_ids), len(season_labels)
    n_k = int(df[schema.replicate].max())

    # Per-site coordinate consistency, then global duplicate check.
    coords = np.full((n_j, 2), np.nan)
    for sid, grp in df.groupby("_site", sort=False):
        xy = grp[[schema.easting, schema.northing]].drop_duplicates()
        if len(xy) > 1:
            raise IngestError(f"site {sid!r} has inconsistent coordinates")
        coords[site_pos[sid]] = xy.iloc[0].to_numpy()
    try:
        spatial = SpatialCoordinates(tuple(site_ids), coords)
    except DataValidationError as e:
        raise IngestError(str(e)) from e

    jj = df["_site"].map(site_pos).to_numpy()
    tt = df[schema.season].astype(int).map(season_pos).to_numpy()
    kk = df[schema.replicate].astype(int).to_numpy() - 1

    y = np.full((n_j, n_t, n_k), np.nan)
    y[jj, tt, kk] = df[schema.y].to_numpy()
    try:
        detection_data = DetectionData(y, spatial, tuple(season_labels))
    except DataValidationError as e:
        raise IngestError(str(e)) from e

    occ = {}
    for name in schema.occurrence:
        arr = np.full((n_j, n_t), np.nan)
        arr[jj, tt] = df[name].to_numpy()
        # site-season resolution: repeated replicates must agree
        chk = df.groupby(["_site", schema.season])[name].nunique()
        if (chk > 1).any():
            raise IngestError(f"occurrence covariate {name!r} varies within a site-season")
        occ[name] = arr
    det = {}
    for name in schema.detection:
        arr = np.full((n_j, n_t, n_k), np.nan)
        arr[jj, tt, kk] = df[name].to_numpy()
        det[name] = arr

    strata = None
    if schema.stratum:
        svals = np.zeros(n_j, dtype=np.int64)
        chk = df.groupby("_site")[schema.stratum].nunique()
        if (chk > 1).any():
            raise IngestError(f"stratum column {schema.stratum!r} varies within a site")
        for sid, grp in df.groupby("_site", sort=False):
            svals[site_pos[sid]] = int(grp[schema.stratum].iloc[0])
        strata = svals

    transforms = {}
    if standardize:
        for name in occ:
            vals = occ[name][np.isfinite(occ[name])]
            mu, sd = float(vals.mean()), float(vals.std())
            sd = sd if sd > 0 else 1.0
            occ[name] = (occ[name] - mu) / sd
            transforms[name] = (mu, sd)
        for name in det:
            vals = det[name][np.isfinite(det[name])]
            mu, sd = float(vals.mean()), float(vals.std())
            sd = sd if sd > 0 else 1.0
            det[name] = (det[name] - mu) / sd
            transforms[name] = (mu, sd)

    covariates = CovariateSet(occ, det, strata, transforms)
    return detection_data, covariates


def _grid(values: np.ndarray):
    """NaN-preserving nested lists with exact float round-trip via repr."""
    def conv(v):
        if isinstance(v, list):
            return [conv(x) for x in v]
        return None if math.isnan(v) else v
    return conv(values.tolist())


def _ungrid(values, shape) -> np.ndarray:
    flat: list[float] = []

    def walk(v):
        if isinstance(v, list):
            for x in v:
                walk(x)
        else:
            flat.append(np.nan if v is None else float(v))

    walk(values)
    return np.asarray(flat, dtype=np.float64).reshape(shape)


def to_json(data: DetectionData, covariates: CovariateSet | None = None) -> str:
    """Canonical JSON serialization (round-trips bit-exactly)."""
    doc = {
        "site_ids": list(data.coords.site_ids),
        "coordinates": data.coords.xy.tolist(),
        "season_labels": list(data.season_labels),
        "shape": list(data.y.shape),
        "y": _grid(data.y),
    }
    if covariates is not None:
        doc["occurrence_covariates"] = {k: _grid(v) for k, v in sorted(covariates.occurrence.items())}
        doc["detection_covariates"] = {k: _grid(v) for k, v in sorted(covariates.detection.items())}
        doc["strata"] = None if covariates.strata is None else covariates.strata.tolist()
        doc["transforms"] = {k: list(v) for k, v in sorted(covariates.transforms.items())}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_json(text: str) -> tuple[DetectionData, CovariateSet]:
    doc = json.loads(text)
    shape = tuple(doc["shape"])
    coords = SpatialCoordinates(tuple(doc["site_ids"]), np.asarray(doc["coordinates"]))
    data = DetectionData(_ungrid(doc["y"], shape), coords, tuple(doc["season_labels"]))
    occ = {k: _ungrid(v, shape[:2]) for k, v in doc.get("occurrence_covariates", {}).items()}
    det = {k: _ungrid(v, shape) for k, v in doc.get("detection_covariates", {}).items()}
    strata = doc.get("strata")
    transforms = {k: (v[0], v[1]) for k, v in doc.get("transforms", {}).items()}
    covs = CovariateSet(occ, det, None if strata is None else np.asarray(strata), transforms)
    return data, covs


def data_hash(data: DetectionData, covariates: CovariateSet | None = None) -> str:
    """Stable content hash used to guard model comparisons."""
    return hashlib.sha256(to_json(data, covariates).encode()).hexdigest()
