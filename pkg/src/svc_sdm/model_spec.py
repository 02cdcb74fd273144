"""Declarative occupancy model specifications and prior/MCMC configuration.

An occurrence term contributes one of five species-environment forms to
the occurrence linear predictor; combined with an optional spatial
intercept and an optional AR(1) year effect this spans every model the
package fits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import CovariateSet, DetectionData

OCC_KINDS = ("intercept", "linear", "quadratic", "stratum", "interaction", "svc")
DET_KINDS = ("intercept", "linear", "quadratic", "per_replicate_intercept")


class SpecValidationError(ValueError):
    """Raised when a model spec is inconsistent with the data."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class OccurrenceTerm:
    kind: str
    covariate: str | None = None
    modifier: str | None = None  # interacting covariate, interaction kind only

    def __post_init__(self):
        if self.kind not in OCC_KINDS:
            raise ValueError(f"unknown occurrence term kind {self.kind!r}")
        if self.kind != "intercept" and not self.covariate:
            raise ValueError(f"{self.kind} term requires a covariate name")
        if self.kind == "interaction" and not self.modifier:
            raise ValueError("interaction term requires a modifier covariate")


@dataclass(frozen=True)
class DetectionTerm:
    kind: str
    covariate: str | None = None

    def __post_init__(self):
        if self.kind not in DET_KINDS:
            raise ValueError(f"unknown detection term kind {self.kind!r}")
        if self.kind in ("linear", "quadratic") and not self.covariate:
            raise ValueError(f"{self.kind} term requires a covariate name")


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters; defaults assume standardized covariates.

    ``phi_lower``/``phi_upper`` of None mean the effective-range
    convention Uniform(3/d_max, 3/d_min) computed from the data's
    inter-site distances at fit time.
    """

    beta_mean: float = 0.0
    beta_var: float = 2.72
    alpha_mean: float = 0.0
    alpha_var: float = 2.72
    sigma2_shape: float = 2.0
    sigma2_scale: float = 1.0
    phi_lower: float | None = None
    phi_upper: float | None = None
    ar1_var_shape: float = 2.0
    ar1_var_scale: float = 1.0
    stratum_var_shape: float = 2.0
    stratum_var_scale: float = 1.0

    def __post_init__(self):
        for name in ("beta_var", "alpha_var", "sigma2_shape", "sigma2_scale",
                     "ar1_var_shape", "ar1_var_scale", "stratum_var_shape",
                     "stratum_var_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if (self.phi_lower is None) != (self.phi_upper is None):
            raise ValueError("phi bounds must both be set or both be None")
        if self.phi_lower is not None and not (0 < self.phi_lower < self.phi_upper):
            raise ValueError("need 0 < phi_lower < phi_upper")

    def phi_bounds(self, coords) -> tuple[float, float]:
        if self.phi_lower is not None:
            return self.phi_lower, self.phi_upper
        d_min, d_max = coords.distance_range()
        return 3.0 / d_max, 3.0 / d_min


@dataclass(frozen=True)
class OccupancyModelSpec:
    occurrence: tuple[OccurrenceTerm, ...]
    detection: tuple[DetectionTerm, ...] = (DetectionTerm("intercept"),)
    spatial_intercept: bool = False
    year_effect: str = "none"  # "none" | "ar1"
    priors: PriorSpec = field(default_factory=PriorSpec)

    def __post_init__(self):
        object.__setattr__(self, "occurrence", tuple(self.occurrence))
        object.__setattr__(self, "detection", tuple(self.detection))
        if self.year_effect not in ("none", "ar1"):
            raise ValueError("year_effect must be 'none' or 'ar1'")

    @property
    def svc_covariates(self) -> tuple[str, ...]:
        return tuple(t.covariate for t in self.occurrence if t.kind == "svc")

    @property
    def has_gp(self) -> bool:
        return self.spatial_intercept or bool(self.svc_covariates)


@dataclass(frozen=True)
class MCMCConfig:
    n_chains: int = 3
    n_iterations: int = 20_000
    n_burn: int = 10_000
    n_thin: int = 10
    n_neighbors: int = 15
    seed: int = 0
    phi_proposal_sd: float = 0.5
    rho_proposal_sd: float = 0.5

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if not self.n_burn < self.n_iterations:
            raise ValueError("n_burn must be < n_iterations")
        if self.n_thin < 1:
            raise ValueError("n_thin must be >= 1")
        if self.draws_per_chain < 1:
            raise ValueError("(n_iterations - n_burn) / n_thin must be >= 1")
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")

    @property
    def draws_per_chain(self) -> int:
        return (self.n_iterations - self.n_burn) // self.n_thin

    @property
    def pooled_draws(self) -> int:
        return self.n_chains * self.draws_per_chain


#: MCMC protocol used for the real analyses: 3 x 100k iterations,
#: 50k burn-in, thinning 50, i.e. 3000 pooled posterior samples.
PAPER_MCMC = MCMCConfig(n_chains=3, n_iterations=100_000, n_burn=50_000, n_thin=50)

#: Desk-scale protocol for the simulation harness (minutes, not hours).
DESK_MCMC = MCMCConfig(n_chains=3, n_iterations=20_000, n_burn=10_000, n_thin=10,
                       n_neighbors=5)


def canonical_model(form: str, covariate: str, modifier: str | None = None,
                    **kwargs) -> OccupancyModelSpec:
    """One of the five species-environment forms, intercept included."""
    if form == "interaction":
        term = OccurrenceTerm("interaction", covariate, modifier or "x_star")
    else:
        term = OccurrenceTerm(form, covariate)
    return OccupancyModelSpec(
        occurrence=(OccurrenceTerm("intercept"), term), **kwargs)


def validate_spec(
    spec: OccupancyModelSpec,
    data: DetectionData,
    covariates: CovariateSet,
    m: int | None = None,
) -> list[str]:
    """Return every violated invariant (empty list when valid)."""
    errors: list[str] = []

    seen = set()
    for t in spec.occurrence:
        key = (t.kind, t.covariate, t.modifier)
        if key in seen:
            errors.append(f"duplicate occurrence term {key}")
        seen.add(key)
    # every non-linear form already includes the base linear effect, so an
    # explicit linear term on the same covariate would duplicate a column
    linear_covs = {t.covariate for t in spec.occurrence if t.kind == "linear"}
    other_covs = {t.covariate for t in spec.occurrence
                  if t.kind not in ("intercept", "linear")}
    for c in sorted(linear_covs & other_covs):
        errors.append(
            f"covariate {c!r} has both a linear term and a form that "
            "already includes the linear effect")

    n_intercept = sum(1 for t in spec.occurrence if t.kind == "intercept")
    if n_intercept > 1:
        errors.append("multiple occurrence intercept terms")

    for t in spec.occurrence:
        if t.kind == "intercept":
            continue
        if t.covariate not in covariates.occurrence:
            errors.append(f"occurrence covariate {t.covariate!r} not supplied")
        if t.kind == "interaction" and t.modifier not in covariates.occurrence:
            errors.append(f"interaction modifier {t.modifier!r} not supplied")
        if t.kind == "stratum":
            if covariates.strata is None:
                errors.append(f"stratum term on {t.covariate!r} requires stratum labels")
            else:
                labels = set(covariates.strata.tolist())
                missing = sorted(set(range(1, covariates.n_strata + 1)) - labels)
                if missing:
                    errors.append(f"stratum term on {t.covariate!r}: empty stratum {missing}")

    if spec.has_gp and m is not None and data.n_sites < m + 1:
        errors.append(f"spatial term requires J >= m+1 (J={data.n_sites}, m={m})")

    if spec.year_effect == "ar1" and data.n_seasons == 1:
        errors.append("ar1 requires T > 1")

    det_kinds = [t.kind for t in spec.detection]
    if det_kinds.count("intercept") > 1:
        errors.append("multiple detection intercept terms")
    if "intercept" in det_kinds and "per_replicate_intercept" in det_kinds:
        errors.append("detection intercept and per_replicate_intercept are mutually exclusive")
    seen_det = set()
    for t in spec.detection:
        key = (t.kind, t.covariate)
        if key in seen_det:
            errors.append(f"duplicate detection term {key}")
        seen_det.add(key)
        if t.kind in ("linear", "quadratic") and t.covariate not in covariates.detection:
            errors.append(f"detection covariate {t.covariate!r} not supplied")

    errors.extend(covariates.check_complete(data))
    return errors


def require_valid(spec, data, covariates, m=None) -> OccupancyModelSpec:
    errors = validate_spec(spec, data, covariates, m)
    if errors:
        raise SpecValidationError(errors)
    return spec


# --- JSON round trip -------------------------------------------------------

def spec_to_json(spec: OccupancyModelSpec) -> str:
    doc = {
        "occurrence": [asdict(t) for t in spec.occurrence],
        "detection": [asdict(t) for t in spec.detection],
        "spatial_intercept": spec.spatial_intercept,
        "year_effect": spec.year_effect,
        "priors": asdict(spec.priors),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def spec_from_json(text: str) -> OccupancyModelSpec:
    doc = json.loads(text)
    return OccupancyModelSpec(
        occurrence=tuple(OccurrenceTerm(**t) for t in doc["occurrence"]),
        detection=tuple(DetectionTerm(**t) for t in doc.get(
            "detection", [{"kind": "intercept"}])),
        spatial_intercept=bool(doc.get("spatial_intercept", False)),
        year_effect=doc.get("year_effect", "none"),
        priors=PriorSpec(**doc.get("priors", {})),
    )


def mcmc_config_to_json(config: MCMCConfig) -> str:
    return json.dumps(asdict(config), indent=2, sort_keys=True)


def mcmc_config_from_json(text: str) -> MCMCConfig:
    return MCMCConfig(**json.loads(text))
