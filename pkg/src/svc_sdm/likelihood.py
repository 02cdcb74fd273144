"""Deterministic occupancy model mathematics.

Link functions, the occurrence/detection linear predictors for every
supported term form, the latent-state conditional, and the site-season
marginal likelihood with the latent state summed out.  Everything here is
pure; the logit-parameterized variants are the ones used in likelihood
paths so values stay finite for |logit| <= 40.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CovariateSet
from .model_spec import OccupancyModelSpec


def logistic(x):
    """Inverse logit, stable in both tails (never underflows to exact 0/1
    for |x| <= 700)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("logit requires probabilities strictly inside (0, 1)")
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def log_logistic(x):
    """log(sigmoid(x)) = -log(1 + e^{-x}), finite for any float x."""
    x = np.asarray(x, dtype=np.float64)
    out = -np.logaddexp(0.0, -x)
    return float(out) if out.ndim == 0 else out


def z_conditional_prob_logits(psi_logit: float, p_logits, y) -> float:
    """P(z=1 | y, psi, p) with probabilities given on the logit scale."""
    y = np.asarray(y)
    p_logits = np.atleast_1d(np.asarray(p_logits, dtype=np.float64))
    if y.shape != p_logits.shape:
        raise ValueError("p and y length mismatch")
    if np.any(y == 1):
        return 1.0
    lp1 = log_logistic(psi_logit) + log_logistic(-p_logits).sum()
    lp0 = log_logistic(-psi_logit)
    return float(np.exp(lp1 - np.logaddexp(lp1, lp0)))


def z_conditional_prob(psi: float, p, y) -> float:
    """P(z=1 | y, psi, p); forced to 1 by any detection (no false positives)."""
    y = np.asarray(y)
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if y.shape != p.shape:
        raise ValueError("p and y length mismatch")
    if np.any(y == 1):
        return 1.0
    lp1 = np.log(psi) + np.log1p(-p).sum()
    lp0 = np.log1p(-psi)
    return float(np.exp(lp1 - np.logaddexp(lp1, lp0)))


def marginal_unit_loglik_logits(psi_logit: float, p_logits, y) -> float:
    """Site-season log likelihood with z summed out, from logits."""
    y = np.asarray(y)
    p_logits = np.atleast_1d(np.asarray(p_logits, dtype=np.float64))
    if y.size == 0:
        return 0.0
    det = log_logistic(np.where(y == 1, p_logits, -p_logits)).sum()
    occupied = log_logistic(psi_logit) + det
    if np.any(y == 1):
        return float(occupied)
    return float(np.logaddexp(occupied, log_logistic(-psi_logit)))


def marginal_unit_loglik(psi: float, p, y) -> float:
    """log[ psi * prod p^y (1-p)^(1-y) + 1{all y=0} (1-psi) ].

    An entirely missing site-season contributes 0 (empty y).
    """
    y = np.asarray(y)
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    if y.size == 0:
        return 0.0
    det = np.where(y == 1, np.log(p), np.log1p(-p)).sum()
    occupied = np.log(psi) + det
    if np.any(y == 1):
        return float(occupied)
    return float(np.logaddexp(occupied, np.log1p(-psi)))


@dataclass
class OccurrenceParams:
    """Coefficients organized by column role so combined forms share one
    base slope per covariate (mirrors the sampler's design matrix)."""

    intercept: float = 0.0
    slopes: dict[str, float] = field(default_factory=dict)
    quadratic: dict[str, float] = field(default_factory=dict)
    stratum_dev: dict[str, np.ndarray] = field(default_factory=dict)
    interaction: dict[tuple[str, str], float] = field(default_factory=dict)
    w0: np.ndarray | None = None
    w1: dict[str, np.ndarray] = field(default_factory=dict)
    eta: np.ndarray | None = None


@dataclass
class DetectionParams:
    intercept: float | None = 0.0
    rep_intercepts: np.ndarray | None = None
    slopes: dict[str, float] = field(default_factory=dict)
    quadratic: dict[str, float] = field(default_factory=dict)


class ParamSpecMismatch(ValueError):
    """Parameters do not conform to the model spec."""


def occurrence_logit(spec: OccupancyModelSpec, params: OccurrenceParams,
                     covariates: CovariateSet, j: int, t: int) -> float:
    """Reference evaluation of the occurrence linear predictor at (j, t)."""
    val = 0.0
    covs_used: set[str] = set()
    for term in spec.occurrence:
        if term.kind == "intercept":
            val += params.intercept
            continue
        x = float(covariates.occurrence[term.covariate][j, t])
        if term.covariate not in covs_used:
            if term.covariate not in params.slopes:
                raise ParamSpecMismatch(f"missing slope for {term.covariate!r}")
            val += params.slopes[term.covariate] * x
            covs_used.add(term.covariate)
        if term.kind == "quadratic":
            val += params.quadratic[term.covariate] * x * x
        elif term.kind == "stratum":
            dev = params.stratum_dev[term.covariate]
            stratum = int(covariates.strata[j])
            if not 1 <= stratum <= dev.shape[0]:
                raise ParamSpecMismatch(f"stratum {stratum} outside deviations")
            val += dev[stratum - 1] * x
        elif term.kind == "interaction":
            x_star = float(covariates.occurrence[term.modifier][j, t])
            val += params.interaction[(term.covariate, term.modifier)] * x_star * x
        elif term.kind == "svc":
            val += params.w1[term.covariate][j] * x
    if spec.spatial_intercept:
        if params.w0 is None:
            raise ParamSpecMismatch("spec has a spatial intercept but params.w0 is None")
        val += params.w0[j]
    if spec.year_effect == "ar1":
        if params.eta is None:
            raise ParamSpecMismatch("spec has an ar1 year effect but params.eta is None")
        val += params.eta[t]
    return float(val)


def detection_logit(spec: OccupancyModelSpec, params: DetectionParams,
                    covariates: CovariateSet, j: int, t: int, k: int) -> float:
    """Reference evaluation of the detection linear predictor at (j, t, k)."""
    val = 0.0
    for term in spec.detection:
        if term.kind == "intercept":
            if params.intercept is None:
                raise ParamSpecMismatch("missing detection intercept")
            val += params.intercept
        elif term.kind == "per_replicate_intercept":
            if params.rep_intercepts is None:
                raise ParamSpecMismatch("missing per-replicate intercepts")
            val += params.rep_intercepts[k]
        else:
            v = float(covariates.detection[term.covariate][j, t, k])
            val += params.slopes[term.covariate] * v
            if term.kind == "quadratic":
                val += params.quadratic[term.covariate] * v * v
    return float(val)
