import itertools
from typing import List, Optional, Tuple
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


MODEL_FILE_VERSION = "1"


class FitConfig(BaseModel):
    """Knobs of one variational-EM fit."""

    model_config = ConfigDict(populate_by_name=True, frozen=True)

    K: int = Field(3, ge=1)
    d: int = Field(4, ge=1)
    lam: float = Field(10.0, ge=0.0, alias="lambda")
    xi: float = Field(0.1, ge=0.0)
    varrho: float = Field(0.1, ge=0.0)
    epsilon: float = Field(1e-5, gt=0.0)
    max_outer: int = Field(100, ge=1)
    max_inner: int = Field(50, ge=1)
    y_step_iters: int = Field(5, ge=1)
    phi_sweeps: int = Field(2, ge=1)
    seed: int = Field(0, ge=0)


class FitReport(BaseModel):
    objective_trace: List[float] = Field(default_factory=list)
    # objective + entropy of q(Z); non-decreasing over every update
    bound_trace: List[float] = Field(default_factory=list)
    outer_iters: int = 0
    inner_iters: int = 0
    converged: bool = False
    jitter_events: int = 0
    seed: int = 0
    aborted: bool = False
    message: Optional[str] = None

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")


class SyntheticConfig(BaseModel):
    """Prototype/duplicate/flip generator settings; defaults give 450 samples in 16-D."""

    model_config = ConfigDict(frozen=True)

    classes: int = Field(3, ge=1)
    prototypes_per_class: int = Field(3, ge=1)
    copies: int = Field(50, ge=1)
    dims: int = Field(16, ge=1)
    flip_prob: float = Field(0.1, ge=0.0, le=1.0)
    class_means: List[float] = Field(default_factory=lambda: [0.9, 0.5, 0.1])
    seed: int = Field(0, ge=0)

    @field_validator("class_means")
    @classmethod
    def _means_are_probabilities(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= m <= 1.0 for m in v):
            raise ValueError("class means must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def _one_mean_per_class(self) -> "SyntheticConfig":
        if len(self.class_means) != self.classes:
            raise ValueError(
                f"expected {self.classes} class means, got {len(self.class_means)}"
            )
        return self

    @property
    def n_samples(self) -> int:
        return self.classes * self.prototypes_per_class * self.copies


class EvalReport(BaseModel):
    accuracy: float = Field(ge=0.0, le=1.0)
    matched_permutation: List[int]
    mean_log_likelihood: float
    effective_dims_per_component: List[int]
    n_samples: int
    tau: float = 0.05

    def as_lines(self) -> List[str]:
        """Stable key=value rendering used by `depcam eval`."""
        return [
            f"accuracy={self.accuracy:.6f}",
            "matched_permutation=" + ",".join(str(p) for p in self.matched_permutation),
            f"mean_log_likelihood={self.mean_log_likelihood:.6f}",
            "effective_dims=" + ",".join(str(e) for e in self.effective_dims_per_component),
            f"tau={self.tau:g}",
            f"n_samples={self.n_samples}",
        ]


class ComponentRecord(BaseModel):
    upsilon: List[float]              # D·d entries, row-major
    phi: List[float]


class FitStats(BaseModel):
    outer_iters: int = 0
    final_objective: Optional[float] = None
    converged: bool = False


class ModelFile(BaseModel):
    """On-disk JSON form of a fitted mixture."""

    model_config = ConfigDict(populate_by_name=True)

    version: str = MODEL_FILE_VERSION
    K: int = Field(ge=1)
    d: int = Field(ge=1)
    D: int = Field(ge=1)
    pi: List[float]
    xi: float = Field(ge=0.0)
    varrho: float = Field(ge=0.0)
    lam: float = Field(ge=0.0, alias="lambda")
    components: List[ComponentRecord]
    seed: int = 0
    fit_stats: FitStats = Field(default_factory=FitStats)

    @model_validator(mode="after")
    def _shapes_agree(self) -> "ModelFile":
        if self.version != MODEL_FILE_VERSION:
            raise ValueError(f"unsupported model file version {self.version!r}")
        if self.D < self.d:
            raise ValueError(f"D={self.D} must be >= d={self.d}")
        if len(self.pi) != self.K or len(self.components) != self.K:
            raise ValueError(f"expected {self.K} mixing weights and components")
        for k, comp in enumerate(self.components):
            if len(comp.upsilon) != self.D * self.d or len(comp.phi) != self.d:
                raise ValueError(f"component {k} does not match D={self.D}, d={self.d}")
        return self


class CVRun(BaseModel):
    """One (lambda, d, xi, varrho, seed, fold) cross-validation job result."""

    lam: float
    d: int
    xi: float
    varrho: float
    seed: int
    fold: int
    train_accuracy: float
    test_accuracy: float
    test_mean_log_likelihood: float
    mean_effective_dims: float
    outer_iters: int
    converged: bool


class CVConfig(BaseModel):
    """Grid and protocol of one cross-validation sweep."""

    model_config = ConfigDict(frozen=True)

    folds: int = Field(5, ge=2)
    seeds: int = Field(5, ge=1)
    K: int = Field(3, ge=1)
    lambda_list: List[float] = Field(default_factory=lambda: [0.0, 1.0, 10.0])
    d_list: List[int] = Field(default_factory=lambda: [4])
    xi_list: List[float] = Field(default_factory=lambda: [0.1])
    varrho_list: List[float] = Field(default_factory=lambda: [0.1])
    epsilon: float = Field(1e-5, gt=0.0)
    max_outer: int = Field(100, ge=1)
    max_inner: int = Field(50, ge=1)
    tau: float = Field(0.05, gt=0.0, lt=1.0)
    # None defers to settings.cv_workers
    workers: Optional[int] = Field(None, ge=0)

    @field_validator("lambda_list", "d_list", "xi_list", "varrho_list")
    @classmethod
    def _non_empty_non_negative(cls, v: list) -> list:
        if not v:
            raise ValueError("grid lists must not be empty")
        if any(x < 0 for x in v):
            raise ValueError("grid values must be non-negative")
        return v

    @field_validator("d_list")
    @classmethod
    def _positive_dims(cls, v: List[int]) -> List[int]:
        if any(x < 1 for x in v):
            raise ValueError("latent dimensions must be at least 1")
        return v

    def grid(self) -> List[Tuple[float, int, float, float]]:
        """(lambda, d, xi, varrho) in a fixed order."""
        return list(
            itertools.product(self.lambda_list, self.d_list, self.xi_list, self.varrho_list)
        )
