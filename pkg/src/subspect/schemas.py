"""Request/response models for the HTTP service.

The named kernels all act on numeric draws, so distribution atoms in a
payload are plain numbers.  Richer atom types (the learner kernels work
over feature/target pairs) stay a library-level concern.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator, model_validator

from .anova import DiscreteDistribution
from .kernels import named_kernel_builders


class DistributionModel(BaseModel):
    atoms: list[float] = Field(min_length=1)
    probs: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _lengths_match(self):
        if len(self.atoms) != len(self.probs):
            raise ValueError("atoms and probs must have equal length")
        return self

    def build(self) -> DiscreteDistribution:
        return DiscreteDistribution(list(self.atoms), self.probs)


class KernelChoice(BaseModel):
    kernel: str
    k: int = Field(ge=1)
    seed: int = 0

    @field_validator("kernel")
    @classmethod
    def _known(cls, name: str) -> str:
        if name not in named_kernel_builders():
            known = ", ".join(sorted(named_kernel_builders()))
            raise ValueError(f"unknown kernel {name!r}; choose from: {known}")
        return name


class SpectrumRequest(KernelChoice):
    dist: DistributionModel
    checks: bool = True


class SpectrumResiduals(BaseModel):
    degeneracy: float
    orthogonality: float
    base_variance: float


class SpectrumResponse(BaseModel):
    kernel: str
    k: int
    theta: float
    zetas: list[float]
    single_draw_variance: float
    residuals: SpectrumResiduals | None = None


class VerifyRequest(KernelChoice):
    n: int = Field(ge=1)
    dist: DistributionModel
    tolerance: float = 1e-10

    @model_validator(mode="after")
    def _k_within_n(self):
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")
        return self


class VerifyResponse(BaseModel):
    n: int
    k: int
    brute_variance: float
    closed_form_variance: float
    per_order: list[float]
    residual: float
    tolerance: float
    ok: bool


class EnvelopeParamsModel(BaseModel):
    bias_constant: float = Field(ge=0)
    bias_decay: float = Field(gt=0)
    n: int = Field(ge=1)
    spectrum: list[float] = Field(min_length=1)


class EnvelopeRequest(BaseModel):
    params: EnvelopeParamsModel
    grid: int = Field(default=512, ge=16)
    curve_points: int = Field(default=101, ge=2)
    sweep_top_variance: list[float] | None = None


class CurvePoint(BaseModel):
    alpha: float
    envelope: float


class SweepPoint(BaseModel):
    top_variance: float
    alpha_star: float
    envelope: float


class EnvelopeResponse(BaseModel):
    alpha_star: float
    envelope: float
    at_boundary: bool
    curve: list[CurvePoint]
    sweep: list[SweepPoint] | None = None


class CgasRequest(BaseModel):
    features: list[list[float]] = Field(min_length=1)
    targets: list[float] = Field(min_length=1)
    learner: str
    depth: int | None = None
    n_neighbors: int | None = None
    k_folds: int = Field(default=3, ge=2)
    b_search: int = Field(default=30, ge=1)
    b_final: int = Field(default=100, ge=1)
    seed: int = 0
    rf_star: bool = False
    train_ensemble: bool = True

    @model_validator(mode="after")
    def _learner_fields(self):
        if self.learner == "tree":
            if self.n_neighbors is not None:
                raise ValueError("n_neighbors applies only to the knn learner")
        elif self.learner == "knn":
            if self.n_neighbors is None:
                raise ValueError("knn learner requires n_neighbors")
            if self.depth is not None:
                raise ValueError("depth applies only to the tree learner")
        else:
            raise ValueError(f"learner must be 'tree' or 'knn', got {self.learner!r}")
        if len(self.features) != len(self.targets):
            raise ValueError("features and targets must have equal length")
        return self


class EnsembleDescription(BaseModel):
    n_members: int
    alpha: float
    sample_size: int
    sampling: str


class CgasResponse(BaseModel):
    alpha_star: float
    grid_used: list[float]
    cv_means: list[float]
    cv_table: dict[str, list[float]]
    ensemble: EnsembleDescription | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
