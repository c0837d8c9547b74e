"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class SolveOptionsModel(BaseModel):
    max_iter: int = 100
    increment_tol: float = 1e-12
    damping_factor: float = Field(0.7, gt=0.0, lt=1.0)
    lambda_min: float = Field(1e-6, le=1.0)
    jacobian_strategy: str = "auto"


class RunRequest(BaseModel):
    case: str
    preset: str | None = None
    set: dict[str, float] = Field(default_factory=dict)
    scale_var: dict[str, float] = Field(default_factory=dict)
    guess: dict[str, float] | None = None
    options: SolveOptionsModel = Field(default_factory=SolveOptionsModel)
    threshold: float = 1.0


class NormsModel(BaseModel):
    f_x0_inf: float
    r_x0_inf: float
    f_x1_star_inf: float


class AlphaEntry(BaseModel):
    eq: str
    value: float


class GammaEntry(BaseModel):
    eq: str
    var_j: str
    var_k: str
    value: float


class SigmaEntry(BaseModel):
    var: str
    value: float


class SufficientConditionModel(BaseModel):
    alpha: float
    beta: float
    holds: bool | None


class EvidenceEntry(BaseModel):
    kind: str
    value: float
    eq: str | None = None
    var_j: str | None = None
    var_k: str | None = None
    var: str | None = None


class SuspectEntry(BaseModel):
    var: str
    score: float
    direction: str
    increment: float
    critical: bool
    evidence: list[EvidenceEntry]


class RunReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, alias="schema")
    case: str
    preset: str
    status: str
    iterations: int
    lambda_: float | None = Field(None, alias="lambda")
    norms: NormsModel | None
    alpha: list[AlphaEntry]
    gamma: list[GammaEntry]
    sigma_diag: list[SigmaEntry]
    sufficient_condition: SufficientConditionModel | None
    suspects: list[SuspectEntry]
    note: str | None = None
    warnings: list[str] = Field(default_factory=list)


class CaseInfo(BaseModel):
    name: str
    m: int
    q: int
    p: int
    presets: list[str]
    parametric: str | None = None


class CaseList(BaseModel):
    cases: list[CaseInfo]


class VerifyRequest(BaseModel):
    case: str
    n: int | None = None


class VerifyCheckModel(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class VerifyResponse(BaseModel):
    case: str
    passed: bool
    checks: list[VerifyCheckModel]
