"""Local HTTP decode service.

POST /v1/decode runs resample -> discretize -> forward -> beam search (or
SHARK2) over immutable shared state; GET /v1/layouts lists the loaded
layouts. Bodies are JSON; CORS is wide open for the local web demo.
Error codes: 400 malformed body, 422 validation failure, 500 numeric
failure.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import ctc, neural, pipeline, shark2
from .errors import NumericError
from .geometry import KeyboardLayout, Trajectory

MAX_K = 10


@dataclass(frozen=True)
class ServeState:
    layouts: dict[str, KeyboardLayout]
    default_layout: str
    params: neural.ModelParams | None
    beam_width: int
    lexicon: ctc.LexiconTrie | None
    template_sets: dict[str, shark2.TemplateSet]
    encode_cfg: pipeline.EncodeConfig

    @classmethod
    def build(
        cls,
        layouts: dict[str, KeyboardLayout],
        params: neural.ModelParams | None,
        lexicon_words,
        beam_width: int = 16,
        encode_cfg: pipeline.EncodeConfig | None = None,
        default_layout: str | None = None,
    ) -> ServeState:
        encode_cfg = encode_cfg or pipeline.EncodeConfig()
        lexicon = ctc.LexiconTrie(lexicon_words) if lexicon_words else None
        template_sets = {}
        if lexicon_words:
            for name, layout in layouts.items():
                template_sets[name] = pipeline.build_template_set(lexicon_words, layout)
        return cls(
            layouts=dict(layouts),
            default_layout=default_layout or next(iter(layouts)),
            params=params,
            beam_width=beam_width,
            lexicon=lexicon,
            template_sets=template_sets,
            encode_cfg=encode_cfg,
        )

    def available_decoders(self) -> list[str]:
        out = []
        if self.params is not None and self.lexicon is not None:
            out.append("neural")
        if self.template_sets:
            out.append("shark2")
        return out


def _validation_error(message, **extra):
    return JSONResponse(status_code=422, content={"error": message, **extra})


def _validate_request(state: ServeState, body) -> tuple | JSONResponse:
    if not isinstance(body, dict):
        return JSONResponse(status_code=400, content={"error": "request body must be a JSON object"})
    points = body.get("points")
    if not isinstance(points, list) or len(points) < 2:
        return _validation_error("points must list at least 2 [x, y] pairs")
    try:
        traj = Trajectory.from_list(points)
    except (ValueError, TypeError) as e:
        return _validation_error(f"bad points: {e}")
    layout_name = body.get("layout", state.default_layout)
    if layout_name not in state.layouts:
        return _validation_error(
            f"unknown layout {layout_name!r}", layouts=sorted(state.layouts)
        )
    decoder = body.get("decoder", "neural" if state.params is not None else "shark2")
    if decoder not in ("neural", "shark2"):
        return _validation_error(f"unknown decoder {decoder!r}")
    if decoder == "neural" and (state.params is None or state.lexicon is None):
        return _validation_error("neural decoder is not loaded (model and lexicon required)")
    if decoder == "shark2" and layout_name not in state.template_sets:
        return _validation_error("shark2 decoder is not loaded (lexicon required)")
    k = body.get("k", 4)
    if not isinstance(k, int) or not 1 <= k <= MAX_K:
        return _validation_error(f"k must be an integer in [1, {MAX_K}]")
    return traj, layout_name, decoder, k


def create_app(state: ServeState) -> FastAPI:
    app = FastAPI(title="g2t decode service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/v1/layouts")
    def layouts():
        return [state.layouts[name].to_json() for name in sorted(state.layouts)]

    @app.post("/v1/decode")
    async def decode(request: Request, debug: int = 0):
        raw = await request.body()
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as e:
            return JSONResponse(status_code=400, content={"error": f"malformed JSON body: {e}"})
        checked = _validate_request(state, body)
        if isinstance(checked, JSONResponse):
            return checked
        traj, layout_name, decoder, k = checked
        layout = state.layouts[layout_name]
        try:
            started = time.perf_counter()
            if decoder == "neural":
                beam_cfg = ctc.BeamConfig(beam_width=state.beam_width, k=k, lexicon=state.lexicon)
                cands = pipeline.neural_decode_topk(
                    traj, layout, state.params, beam_cfg, state.encode_cfg
                )
            else:
                cands = pipeline.shark2_decode_topk(
                    traj, layout, state.template_sets[layout_name], k
                )
            latency_ms = (time.perf_counter() - started) * 1000.0
        except NumericError as e:
            return JSONResponse(status_code=500, content={"error": str(e)})
        response = {
            "candidates": [{"word": w, "log_prob": s} for w, s in cands[:k]],
            "latency_ms": latency_ms,
        }
        if debug:
            disc = pipeline.discretize_trajectory(traj, layout, state.encode_cfg)
            response["debug"] = {"indices": disc.indices.tolist()}
        return response

    return app
