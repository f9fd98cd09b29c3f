"""FastAPI application wrapping the service layer."""

from __future__ import annotations

from fastapi import FastAPI

from . import service as svc


def create_app() -> FastAPI:
    app = FastAPI(title="slpverify",
                  description="Finite-domain consistency and refinement "
                              "checking for SLP models")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/v1/parse", response_model=svc.ParseResponse)
    def parse(req: svc.ParseRequest) -> svc.ParseResponse:
        return svc.run_parse(req)

    @app.post("/v1/check", response_model=svc.CheckResponse)
    def check(req: svc.CheckRequest) -> svc.CheckResponse:
        return svc.run_check(req)

    @app.post("/v1/pos", response_model=svc.PosResponse)
    def pos(req: svc.PosRequest) -> svc.PosResponse:
        return svc.run_pos(req)

    @app.post("/v1/smt", response_model=svc.SmtResponse)
    def smt(req: svc.SmtRequest) -> svc.SmtResponse:
        return svc.run_smt(req)

    @app.post("/v1/trace", response_model=svc.TraceResponse)
    def trace(req: svc.TraceRequest) -> svc.TraceResponse:
        return svc.run_trace(req)

    @app.post("/v1/rw", response_model=svc.RwResponse)
    def rw(req: svc.RwRequest) -> svc.RwResponse:
        return svc.run_rw(req)

    return app


app = create_app()
