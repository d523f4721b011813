"""HTTP service exposing the core library.

Every endpoint is a stateless wrapper: validate the request model, call
the corresponding library function, shape the response model.  Domain
errors (bad parameters, refused enumeration sizes) surface as 422s with
the library's own message.
"""

from __future__ import annotations

from itertools import chain, combinations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .anova import HoeffdingDecomposer
from .cgas import CgasConfig, rf_star, run_cgas, select_alpha
from .data import Dataset
from .envelope import EnvelopeParams, mse_envelope, optimal_alpha
from .kernels import make_kernel
from .learners import KnnConfig, TreeConfig
from .schemas import (
    CgasRequest,
    CgasResponse,
    CurvePoint,
    EnsembleDescription,
    EnvelopeRequest,
    EnvelopeResponse,
    HealthResponse,
    SpectrumRequest,
    SpectrumResiduals,
    SpectrumResponse,
    SweepPoint,
    VerifyRequest,
    VerifyResponse,
)
from .subag import verify_exact_identity

# All-pairs orthogonality is exponential in k; refuse checks past this.
MAX_CHECK_ARITY = 6


def _spectrum_residuals(decomposer: HoeffdingDecomposer) -> SpectrumResiduals:
    k = decomposer.kernel.arity
    degeneracy = max(
        (decomposer.check_degeneracy(c) for c in range(1, k + 1)), default=0.0
    )
    index_sets = [
        frozenset(s)
        for s in chain.from_iterable(
            combinations(range(k), size) for size in range(1, k + 1)
        )
    ]
    orthogonality = 0.0
    for i, left in enumerate(index_sets):
        for right in index_sets[i + 1 :]:
            if left != right:
                orthogonality = max(
                    orthogonality, decomposer.check_orthogonality(left, right)
                )
    base = decomposer.base_variance()
    return SpectrumResiduals(
        degeneracy=degeneracy,
        orthogonality=orthogonality,
        base_variance=base.residual,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="subspect", version=__version__)

    @app.exception_handler(ValueError)
    async def _domain_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/spectrum", response_model=SpectrumResponse)
    async def spectrum(request: SpectrumRequest) -> SpectrumResponse:
        kernel = make_kernel(request.kernel, request.k, seed=request.seed)
        decomposer = HoeffdingDecomposer(kernel, request.dist.build())
        spec = decomposer.spectrum()
        residuals = None
        if request.checks:
            if request.k > MAX_CHECK_ARITY:
                raise ValueError(
                    f"residual checks enumerate all index-set pairs and are "
                    f"refused for k > {MAX_CHECK_ARITY}; pass checks=false"
                )
            residuals = _spectrum_residuals(decomposer)
        return SpectrumResponse(
            kernel=request.kernel,
            k=request.k,
            theta=spec.theta,
            zetas=list(spec.zetas),
            single_draw_variance=spec.single_draw_variance(),
            residuals=residuals,
        )

    @app.post("/verify", response_model=VerifyResponse)
    async def verify(request: VerifyRequest) -> VerifyResponse:
        kernel = make_kernel(request.kernel, request.k, seed=request.seed)
        report = verify_exact_identity(
            kernel, request.dist.build(), request.n, request.k
        )
        return VerifyResponse(
            n=report.n,
            k=report.k,
            brute_variance=report.brute_variance,
            closed_form_variance=report.closed_form_variance,
            per_order=list(report.per_order),
            residual=report.residual,
            tolerance=request.tolerance,
            ok=report.residual <= request.tolerance,
        )

    @app.post("/envelope", response_model=EnvelopeResponse)
    async def envelope(request: EnvelopeRequest) -> EnvelopeResponse:
        params = EnvelopeParams(
            bias_constant=request.params.bias_constant,
            bias_decay=request.params.bias_decay,
            n=request.params.n,
            spectrum=tuple(request.params.spectrum),
        )
        best = optimal_alpha(params, grid_size=request.grid)
        alphas = np.linspace(params.alpha_min, 1.0, request.curve_points)
        curve = [
            CurvePoint(alpha=float(a), envelope=mse_envelope(float(a), params))
            for a in alphas
        ]
        sweep = None
        if request.sweep_top_variance is not None:
            sweep = []
            for value in request.sweep_top_variance:
                if value < 0:
                    raise ValueError("swept variance values must be >= 0")
                varied = EnvelopeParams(
                    bias_constant=params.bias_constant,
                    bias_decay=params.bias_decay,
                    n=params.n,
                    spectrum=params.spectrum[:-1] + (value,),
                )
                result = optimal_alpha(varied, grid_size=request.grid)
                sweep.append(
                    SweepPoint(
                        top_variance=value,
                        alpha_star=result.alpha,
                        envelope=result.value,
                    )
                )
        return EnvelopeResponse(
            alpha_star=best.alpha,
            envelope=best.value,
            at_boundary=best.at_boundary,
            curve=curve,
            sweep=sweep,
        )

    @app.post("/cgas", response_model=CgasResponse)
    async def cgas(request: CgasRequest) -> CgasResponse:
        data = Dataset(request.features, request.targets)
        if request.learner == "tree":
            learner = TreeConfig(max_depth=request.depth)
        else:
            learner = KnnConfig(request.n_neighbors)
        config = CgasConfig(
            b_search=request.b_search,
            b_final=request.b_final,
            k_folds=request.k_folds,
            seed=request.seed,
        )
        if request.rf_star:
            result = rf_star(config, data, learner)
        elif request.train_ensemble:
            result = run_cgas(config, data, learner)
        else:
            result = select_alpha(config, data, learner)
        blob = result.as_dict()
        ensemble = None
        if result.ensemble is not None:
            ensemble = EnsembleDescription(
                n_members=result.ensemble.n_members,
                alpha=result.ensemble.alpha,
                sample_size=result.ensemble.sample_size,
                sampling=result.ensemble.sampling,
            )
        return CgasResponse(
            alpha_star=blob["alpha_star"],
            grid_used=blob["grid_used"],
            cv_means=blob["cv_means"],
            cv_table=blob["cv_table"],
            ensemble=ensemble,
        )

    return app
