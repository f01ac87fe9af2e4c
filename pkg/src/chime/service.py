"""HTTP service for the chat UI: ask, transcripts, issue lookup, health.

Handlers are stateless apart from an in-process transcript map; every
answer carries a transcript id that stays resolvable until the process
exits. Malformed requests get machine-readable 400 bodies, pipeline
failures 502 bodies naming the error class.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from chime.config import PipelineConfig, make_backend, make_embedder
from chime.errors import ChimeError, InvalidInputError, InvalidQueryError
from chime.llm import ChatBackend, EmbeddingProvider
from chime.pipeline import ABLATABLE_STAGES, ask
from chime.store import Filter, StoredCorpus, StructuredQuery

_DEFAULT_PROJECTION = ("repo", "number", "title", "state", "labels")

# Query-param name → (filter field, operator). Date-window params apply to
# the update timestamp.
_ISSUE_PARAMS = {
    "repo": ("repo", "eq"),
    "number": ("number", "eq"),
    "state": ("state", "eq"),
    "label": ("label", "eq"),
    "assignee": ("assignee", "eq"),
    "exception_type": ("exception_type", "eq"),
    "file": ("file", "eq"),
    "class": ("class", "eq"),
    "created_before": ("created_at", "before"),
    "created_after": ("created_at", "after"),
    "updated_before": ("updated_at", "before"),
    "updated_after": ("updated_at", "after"),
    "older_than_days": ("updated_at", "older_than_days"),
    "within_days": ("updated_at", "within_days"),
}
_CONTROL_PARAMS = ("limit", "fields", "all")


def _error_body(error: str, message: str) -> dict:
    return {"error": error, "message": message}


def create_app(
    config: PipelineConfig | None = None,
    store: StoredCorpus | None = None,
    llm: ChatBackend | None = None,
    embed: EmbeddingProvider | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    config = config or PipelineConfig()
    embed = embed or make_embedder(config)
    store = store or StoredCorpus(config.store_path, embedder=embed)
    llm = llm or make_backend(config)

    app = FastAPI(title="chime", docs_url=None, redoc_url=None)
    transcripts: dict[str, dict] = {}

    @app.exception_handler(RequestValidationError)
    async def invalid_request(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content=_error_body("invalid-request", str(exc)))

    @app.get("/health")
    def health():
        return {"status": "ok", "issues": store.count()}

    @app.post("/ask")
    def ask_endpoint(payload: dict = Body(...)):
        question = payload.get("question")
        if not isinstance(question, str) or not question.strip():
            return JSONResponse(
                status_code=400,
                content=_error_body("invalid-request", "question must be a non-empty string"),
            )
        do_validate = payload.get("validate", True)
        if not isinstance(do_validate, bool):
            return JSONResponse(
                status_code=400,
                content=_error_body("invalid-request", "validate must be a boolean"),
            )
        ablate = payload.get("ablate", [])
        if not isinstance(ablate, list) or not set(ablate) <= ABLATABLE_STAGES:
            return JSONResponse(
                status_code=400,
                content=_error_body(
                    "invalid-request", f"ablate must be a list drawn from {sorted(ABLATABLE_STAGES)}"
                ),
            )
        stages = tuple(dict.fromkeys(tuple(ablate) + config.ablation_stages()))
        try:
            result = ask(
                question,
                store,
                llm,
                embed,
                k=config.k,
                threshold=config.threshold,
                run_validation=do_validate,
                ablate=stages,
            )
        except InvalidInputError as exc:
            return JSONResponse(status_code=400, content=_error_body("invalid-input", str(exc)))
        except ChimeError as exc:
            return JSONResponse(
                status_code=502, content=_error_body(type(exc).__name__, str(exc))
            )
        transcripts[result.transcript_id] = result.transcript
        return {
            "final": result.final,
            "transcript_id": result.transcript_id,
            "badge": result.badge,
        }

    @app.get("/transcripts/{transcript_id}")
    def get_transcript(transcript_id: str):
        transcript = transcripts.get(transcript_id)
        if transcript is None:
            return JSONResponse(
                status_code=404,
                content=_error_body("not-found", f"no transcript {transcript_id!r}"),
            )
        return transcript

    @app.get("/issues")
    def issues(request: Request):
        params = dict(request.query_params)
        unknown = set(params) - set(_ISSUE_PARAMS) - set(_CONTROL_PARAMS)
        if unknown:
            return JSONResponse(
                status_code=400,
                content=_error_body("invalid-query", f"unknown parameters: {sorted(unknown)}"),
            )
        try:
            filters = tuple(
                Filter(field=field, op=op, value=params[name])
                for name, (field, op) in _ISSUE_PARAMS.items()
                if name in params
            )
            limit = int(params["limit"]) if "limit" in params else None
            fields = (
                tuple(f.strip() for f in params["fields"].split(",") if f.strip())
                if "fields" in params
                else _DEFAULT_PROJECTION
            )
            query = StructuredQuery(
                filters=filters,
                projection=fields,
                limit=limit,
                select_all=params.get("all", "").lower() in ("1", "true", "yes"),
            )
            rows = store.execute_projected(query)
        except (InvalidQueryError, ValueError) as exc:
            return JSONResponse(status_code=400, content=_error_body("invalid-query", str(exc)))
        return {"issues": rows, "count": len(rows)}

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
