"""HTTP service exposing the solver, diagnostics and verification."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..errors import NrdiagError
from ..problems import case_catalog, get_case, perturb_preset, resolve_case_spec
from ..report import run_pipeline
from ..solver import SolveOptions
from ..verify import run_verification
from .schemas import (
    CaseInfo,
    CaseList,
    RunReport,
    RunRequest,
    VerifyRequest,
    VerifyResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="nrdiag", version="0.1.0",
                  description="Newton-Raphson solves with initial-guess diagnostics")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/cases", response_model=CaseList)
    def cases() -> CaseList:
        return CaseList(cases=[CaseInfo(**row) for row in case_catalog()])

    @app.post("/run", response_model=RunReport, response_model_by_alias=True)
    def run(req: RunRequest) -> RunReport:
        try:
            case, preset_name = resolve_case_spec(req.case)
            if req.preset:
                preset_name = req.preset
            guess = perturb_preset(case, overrides=req.set or None,
                                   scale=req.scale_var or None, preset=preset_name)
            if req.guess:
                for name, value in req.guess.items():
                    guess[case.var_index(name)] = float(value)
            opts = SolveOptions(
                max_iter=req.options.max_iter,
                increment_tol=req.options.increment_tol,
                damping_factor=req.options.damping_factor,
                lambda_min=req.options.lambda_min,
                jacobian_strategy=req.options.jacobian_strategy,
            )
        except (NrdiagError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        report, _converged = run_pipeline(case, preset_name, guess, opts,
                                          threshold=req.threshold)
        return RunReport.model_validate(report)

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest) -> VerifyResponse:
        try:
            # structure verification costs O(m^2) residual evaluations, so the
            # grid case runs at desk size
            params = {}
            if req.case == "ac":
                n = req.n or 4
                if n > 8:
                    raise HTTPException(status_code=400,
                                        detail="verification needs a small grid; use n <= 8")
                params = {"n": n}
            case = get_case(req.case, **params)
        except NrdiagError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        result = run_verification(case)
        return VerifyResponse(
            case=result.case,
            passed=result.passed,
            checks=[{"name": c.name, "passed": c.passed, "detail": c.detail} for c in result.checks],
        )

    return app


app = create_app()
