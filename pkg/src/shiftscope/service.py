"""HTTP facade over the diagnosis session machine.

Every mutation goes through `engine.advance_session`, so the service adds
only transport concerns: bearer auth, persistence, an audit log detailed
enough to replay a session through the engine verbatim, and background
execution for the two slow tests (`mmd`, `fit_source_model`).  Session
snapshots are immutable, which keeps the merge of a background result into
a concurrently-updated session a plain field union.

Status codes: 400 malformed body/CSV, 401 bad token, 404 unknown session,
409 input illegal in the current step (response lists the legal ones),
413 oversized upload, 422 semantically invalid input.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import replace
from typing import Optional

import numpy as np
from fastapi import APIRouter, Depends, FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .datamodel import (Causality, DataFormatError, Dataset, LabelSpace,
                        TriState, label_space_from_dict, read_dataset_csv,
                        write_dataset_csv)
from .density import fit_kde
from .engine import (KNOWN_CLAIMS, STEP_TESTING, ExpertAssertion, Finalize,
                     IllegalSessionInput, Proceed, ProvideAssertion,
                     ProvideCausality, ProvideDataset, RunTest, SessionState,
                     advance_session, allowed_inputs,
                     model_well_specification, new_session)
from .stattests import (feature_shift_report_from_dict, mmd_permutation_test,
                        test_result_from_dict)
from .synthgen import misspecified_band_pair

__all__ = ["create_app", "CANNED_CASES", "MAX_UPLOAD_BYTES"]

MAX_UPLOAD_BYTES = 50 * 1024 * 1024
ASYNC_TESTS = ("mmd", "fit_source_model")
SYNC_TESTS = ("feature_shift", "label_shift")
DENSITY_GRID_POINTS = 512

_QUESTIONS = ("causality", "proceed", "finalize") + KNOWN_CLAIMS

# The three walk-through cases.  Two ship as narrative only; the heart case
# bundles a small two-clinic dataset so the evidence step has something to
# test.  `suggested` answers are what the one-keystroke path submits.
CANNED_CASES = {
    "heart-disease": {
        "title": "Heart disease screening, clinic A to clinic B",
        "narrative": (
            "A classifier for coronary disease was trained on patients of one "
            "clinic and deployed at another whose catchment skews older. "
            "Symptoms are caused by the underlying condition of the patient "
            "population reaching each clinic, and the physiological link "
            "between measurements and disease is assumed stable."),
        "causality": "XtoY",
        "has_data": True,
        "suggested_assertions": [
            {"claim": "feature_distribution_changed", "value": "Yes",
             "justification": "the second clinic's patient mix skews older"},
            {"claim": "concept_stable", "value": "Yes",
             "justification": "physiology does not differ between clinics"},
        ],
        "expected_scenario": "Covariate",
    },
    "spam-detection": {
        "title": "Spam filtering under campaign waves",
        "narrative": (
            "A mail filter sees the proportion of spam rise and fall with "
            "botnet campaigns, while the wording of individual spam and ham "
            "messages barely moves. The label (spam or not) causes the text."),
        "causality": "YtoX",
        "has_data": False,
        "suggested_assertions": [
            {"claim": "prior_changed", "value": "Yes",
             "justification": "spam volume rises and falls with campaigns"},
            {"claim": "class_conditionals_equal", "value": "Yes",
             "justification": "message wording per class is stable"},
        ],
        "expected_scenario": "Prior",
    },
    "image-recognition": {
        "title": "Image recognition after a camera swap",
        "narrative": (
            "An object recognizer moves to a new camera: the class mix of "
            "photographed objects is unchanged, but optics and color response "
            "alter every image. The object class causes the pixels."),
        "causality": "YtoX",
        "has_data": False,
        "suggested_assertions": [
            {"claim": "prior_changed", "value": "No",
             "justification": "the same objects are photographed at the same rates"},
            {"claim": "class_conditionals_equal", "value": "No",
             "justification": "new optics change image appearance within every class"},
        ],
        "expected_scenario": "ClassConditional",
    },
}


class _SessionRecord:
    """One session plus its service-side bookkeeping."""

    def __init__(self, state: SessionState, case: Optional[str] = None):
        self.state = state
        self.lock = threading.Lock()
        self.audit: list = []
        self.tasks: dict = {}        # test -> {"status", "error", "requested_at"}
        self.case = case
        self.diagnosis_dict: Optional[dict] = None
        self.dataset_paths: dict = {}   # role -> path relative to data_dir


class _Store:
    def __init__(self, data_dir: str):
        self.data_dir = os.path.abspath(data_dir)
        self.sessions_dir = os.path.join(self.data_dir, "sessions")
        os.makedirs(self.sessions_dir, exist_ok=True)
        self._records: dict = {}
        self._registry_lock = threading.Lock()

    # -- layout ------------------------------------------------------------

    def session_path(self, sid: str) -> str:
        return os.path.join(self.sessions_dir, f"{sid}.json")

    def dataset_dir(self, sid: str) -> str:
        d = os.path.join(self.sessions_dir, sid)
        os.makedirs(d, exist_ok=True)
        return d

    def resolve(self, relpath: str) -> str:
        return os.path.join(self.data_dir, relpath)

    # -- registry ----------------------------------------------------------

    def create(self, case: Optional[str] = None, level: float = 0.05) -> _SessionRecord:
        sid = uuid.uuid4().hex
        record = _SessionRecord(new_session(sid, level=level), case=case)
        with self._registry_lock:
            self._records[sid] = record
        with record.lock:
            self.persist(record)
        return record

    def get(self, sid: str) -> Optional[_SessionRecord]:
        with self._registry_lock:
            record = self._records.get(sid)
        if record is not None:
            return record
        path = self.session_path(sid)
        if not os.path.exists(path):
            return None
        record = self._load(path)
        with self._registry_lock:
            # lost the race to another loader: keep the first one in
            return self._records.setdefault(sid, record)

    # -- persistence ---------------------------------------------------------

    def persist(self, record: _SessionRecord) -> None:
        """Write the session snapshot; caller holds the record lock."""
        s = record.state
        results = []
        for name, result in s.test_results:
            results.append({"test": name,
                            "result": result if name == "fit_source_model"
                            else result.to_dict()})
        doc = {
            "id": s.id,
            "step": s.step,
            "causality": s.causality.value if s.causality else None,
            "level": s.level,
            "label_space": s.label_space.to_dict() if s.label_space else None,
            "datasets": record.dataset_paths,
            "dataset_names": {r: getattr(s, r).name for r in ("source", "target")
                              if getattr(s, r) is not None},
            "answered": [list(p) for p in s.answered],
            "test_results": results,
            "model_well_specified": s.model_well_specified.value,
            "model_metrics": s.model_metrics,
            "assertions": [a.to_dict() for a in s.assertions],
            "diagnosis": record.diagnosis_dict,
            "advisory": s.advisory,
            "created_at": s.created_at,
            "updated_at": s.updated_at,
            "audit": record.audit,
            "tasks": record.tasks,
            "case": record.case,
        }
        path = self.session_path(s.id)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)

    def _load(self, path: str) -> _SessionRecord:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        datasets = {}
        for role, rel in doc["datasets"].items():
            name = doc.get("dataset_names", {}).get(role, role)
            datasets[role] = read_dataset_csv(self.resolve(rel), name=name)
        results = []
        for entry in doc["test_results"]:
            name = entry["test"]
            if name == "fit_source_model":
                results.append((name, entry["result"]))
            elif name == "feature_shift":
                results.append((name, feature_shift_report_from_dict(entry["result"])))
            else:
                results.append((name, test_result_from_dict(entry["result"])))
        space = (label_space_from_dict(doc["label_space"])
                 if doc["label_space"] else None)
        state = SessionState(
            id=doc["id"],
            step=doc["step"],
            causality=Causality(doc["causality"]) if doc["causality"] else None,
            source=datasets.get("source"),
            target=datasets.get("target"),
            label_space=space,
            answered=tuple((q, v) for q, v in doc["answered"]),
            test_results=tuple(results),
            assertions=tuple(ExpertAssertion(a["claim"], TriState(a["value"]),
                                             a["justification"])
                             for a in doc["assertions"]),
            model_well_specified=TriState(doc["model_well_specified"]),
            model_metrics=doc["model_metrics"],
            diagnosis=None,  # rendered from the stored dict below
            advisory=doc["advisory"],
            level=doc["level"],
            created_at=doc["created_at"],
            updated_at=doc["updated_at"],
        )
        record = _SessionRecord(state, case=doc.get("case"))
        record.audit = doc["audit"]
        record.diagnosis_dict = doc["diagnosis"]
        record.dataset_paths = doc["datasets"]
        tasks = doc.get("tasks", {})
        for name, task in tasks.items():
            if task.get("status") == "running":
                task["status"] = "failed"
                task["error"] = "service restarted before the result landed"
        record.tasks = tasks
        return record


def _audit(record: _SessionRecord, event: str, detail: dict,
           step_before: str, step_after: str) -> None:
    record.audit.append({
        "seq": len(record.audit),
        "at": time.time(),
        "event": event,
        "detail": detail,
        "step_before": step_before,
        "step_after": step_after,
    })


def _not_found(sid: str) -> JSONResponse:
    return JSONResponse({"detail": f"no such session: {sid}"}, status_code=404)


def _illegal(exc: IllegalSessionInput) -> JSONResponse:
    return JSONResponse({"detail": str(exc), "allowed": list(exc.allowed)},
                        status_code=409)


def _dataset_meta(ds: Optional[Dataset]) -> Optional[dict]:
    if ds is None:
        return None
    return {"name": ds.name, "n": ds.n, "d": ds.d, "labeled": ds.is_labeled}


def _session_view(record: _SessionRecord) -> dict:
    s = record.state
    tests = []
    for name, result in s.test_results:
        if name == "fit_source_model":
            tests.append({"test": name, "status": "done",
                          "result": {"well_specified": s.model_well_specified.value,
                                     "metrics": s.model_metrics}})
        else:
            tests.append({"test": name, "status": "done",
                          "result": result.to_dict()})
    landed = {t["test"] for t in tests}
    for name, task in record.tasks.items():
        if name not in landed and task["status"] != "done":
            tests.append({"test": name, "status": task["status"],
                          "error": task.get("error")})
    return {
        "session_id": s.id,
        "step": s.step,
        "causality": s.causality.value if s.causality else None,
        "level": s.level,
        "case": record.case,
        "datasets": {"source": _dataset_meta(s.source),
                     "target": _dataset_meta(s.target)},
        "tests": tests,
        "assertions": [a.to_dict() for a in s.assertions],
        "answered": [list(p) for p in s.answered],
        "diagnosis": record.diagnosis_dict,
        "advisory": s.advisory,
        "audit": record.audit,
        "created_at": s.created_at,
        "updated_at": s.updated_at,
    }


def _case_dataset_paths(store: _Store, case_id: str) -> dict:
    """Materialize the bundled two-clinic files; generated once, reused after."""
    case_dir = os.path.join(store.data_dir, "cases", case_id)
    paths = {role: os.path.join(case_dir, f"{role}.csv")
             for role in ("source", "target")}
    if not all(os.path.exists(p) for p in paths.values()):
        os.makedirs(case_dir, exist_ok=True)
        pair, _ = misspecified_band_pair(seed=0)
        write_dataset_csv(pair.source, paths["source"])
        write_dataset_csv(pair.target, paths["target"])
    return paths


def create_app(data_dir: str, token: str,
               max_upload_bytes: int = MAX_UPLOAD_BYTES,
               frontend_dir: Optional[str] = None) -> FastAPI:
    if not token:
        raise ValueError("a bearer token is required")
    store = _Store(data_dir)

    def require_token(request: Request) -> None:
        supplied = request.headers.get("Authorization", "")
        if supplied != f"Bearer {token}":
            raise HTTPException(status_code=401,
                                detail="missing or invalid bearer token",
                                headers={"WWW-Authenticate": "Bearer"})

    app = FastAPI(title="shiftscope service", version=__version__,
                  openapi_url=None, docs_url=None, redoc_url=None)
    api = APIRouter(prefix="/api/v1", dependencies=[Depends(require_token)])

    # -- sessions ------------------------------------------------------------

    @api.post("/sessions")
    async def create_session(request: Request):
        raw = await request.body()
        body = {}
        if raw.strip():
            try:
                body = json.loads(raw)
            except json.JSONDecodeError:
                return JSONResponse({"detail": "malformed JSON body"},
                                    status_code=400)
            if not isinstance(body, dict):
                return JSONResponse({"detail": "body must be a JSON object"},
                                    status_code=400)
        case = body.get("case")
        if case is not None and case not in CANNED_CASES:
            return JSONResponse(
                {"detail": f"unknown case {case!r}; "
                           f"known: {', '.join(sorted(CANNED_CASES))}"},
                status_code=422)
        level = body.get("level", 0.05)
        if not isinstance(level, (int, float)) or not 0.0 < level < 1.0:
            return JSONResponse({"detail": "level must lie in (0, 1)"},
                                status_code=422)
        record = store.create(case=case, level=float(level))
        return JSONResponse({"session_id": record.state.id,
                             "step": record.state.step,
                             "case": case},
                            status_code=201)

    @api.get("/sessions/{sid}")
    def get_session(sid: str):
        record = store.get(sid)
        if record is None:
            return _not_found(sid)
        with record.lock:
            return JSONResponse(_session_view(record))

    # -- questionnaire ---------------------------------------------------------

    @api.post("/sessions/{sid}/answer")
    async def post_answer(sid: str, request: Request):
        record = store.get(sid)
        if record is None:
            return _not_found(sid)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse({"detail": "malformed JSON body"},
                                status_code=400)
        if not isinstance(body, dict) or "question" not in body:
            return JSONResponse({"detail": "body must carry a question key"},
                                status_code=400)
        question = body["question"]
        value = body.get("value")
        if question not in _QUESTIONS:
            return JSONResponse(
                {"detail": f"unknown question {question!r}; "
                           f"known: {', '.join(_QUESTIONS)}"},
                status_code=422)
        try:
            if question == "causality":
                inp = ProvideCausality(Causality(str(value)))
            elif question == "proceed":
                inp = Proceed()
            elif question == "finalize":
                inp = Finalize()
            else:
                inp = ProvideAssertion(question, TriState(str(value)),
                                       str(body.get("justification", "")))
        except ValueError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=422)
        with record.lock:
            before = record.state.step
            try:
                record.state = advance_session(record.state, inp)
            except IllegalSessionInput as exc:
                return _illegal(exc)
            except ValueError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            if record.state.diagnosis is not None:
                record.diagnosis_dict = record.state.diagnosis.to_dict()
            detail = {"question": question}
            if question == "causality":
                detail["value"] = str(value)
            elif question not in ("proceed", "finalize"):
                detail.update({"value": str(value),
                               "justification": str(body.get("justification", ""))})
            _audit(record, question if question in ("causality", "proceed",
                                                    "finalize") else "assertion",
                   detail, before, record.state.step)
            store.persist(record)
            return JSONResponse({
                "step": record.state.step,
                "accepted": {"question": question, "value": value},
                "advisory": record.state.advisory,
                "diagnosis": record.diagnosis_dict,
            })

    # -- datasets ---------------------------------------------------------------

    @api.post("/sessions/{sid}/datasets")
    def post_dataset(sid: str, role: str = Form(...),
                     file: Optional[UploadFile] = File(None),
                     case: Optional[str] = Form(None)):
        record = store.get(sid)
        if record is None:
            return _not_found(sid)
        if role not in ("source", "target"):
            return JSONResponse(
                {"detail": "dataset role must be 'source' or 'target'"},
                status_code=422)
        if file is None and case is None:
            return JSONResponse({"detail": "either file or case is required"},
                                status_code=422)
        if case is not None:
            case_meta = CANNED_CASES.get(case)
            if case_meta is None:
                return JSONResponse({"detail": f"unknown case {case!r}"},
                                    status_code=422)
            if not case_meta["has_data"]:
                return JSONResponse(
                    {"detail": f"case {case!r} ships no datasets"},
                    status_code=422)
            path = _case_dataset_paths(store, case)[role]
        else:
            blob = file.file.read(max_upload_bytes + 1)
            if len(blob) > max_upload_bytes:
                return JSONResponse(
                    {"detail": f"upload exceeds {max_upload_bytes} bytes"},
                    status_code=413)
            path = os.path.join(store.dataset_dir(sid), f"{role}.csv")
            with open(path, "wb") as fh:
                fh.write(blob)
        try:
            dataset = read_dataset_csv(path, name=role)
        except DataFormatError as exc:
            if case is None:
                os.remove(path)
            return JSONResponse({"detail": str(exc), "row": exc.row,
                                 "column": exc.column}, status_code=400)
        with record.lock:
            before = record.state.step
            try:
                record.state = advance_session(
                    record.state, ProvideDataset(role, dataset))
            except IllegalSessionInput as exc:
                return _illegal(exc)
            except ValueError as exc:
                status = 409 if "already provided" in str(exc) else 422
                return JSONResponse({"detail": str(exc)}, status_code=status)
            record.dataset_paths[role] = os.path.relpath(path, store.data_dir)
            _audit(record, "dataset",
                   {"role": role, "path": record.dataset_paths[role],
                    "case": case, "n": dataset.n, "d": dataset.d,
                    "labeled": dataset.is_labeled},
                   before, record.state.step)
            store.persist(record)
            return JSONResponse({"step": record.state.step,
                                 "dataset": _dataset_meta(dataset)})

    # -- tests ----------------------------------------------------------------

    def _land_async_result(record: _SessionRecord, req: RunTest,
                           compute) -> None:
        try:
            payload = compute()
        except Exception as exc:  # surfaced to the poller, not the log
            with record.lock:
                record.tasks[req.test]["status"] = "failed"
                record.tasks[req.test]["error"] = str(exc)
                store.persist(record)
            return
        with record.lock:
            state = record.state
            if state.step != STEP_TESTING:
                record.tasks[req.test]["status"] = "failed"
                record.tasks[req.test]["error"] = (
                    "session advanced past Testing before the result landed")
                store.persist(record)
                return
            if req.test == "mmd":
                state = replace(
                    state, test_results=state.test_results + (("mmd", payload),),
                    updated_at=time.time())
            else:
                ws, metrics = payload
                state = replace(
                    state, model_well_specified=ws, model_metrics=metrics,
                    test_results=state.test_results + (("fit_source_model",
                                                        metrics),),
                    updated_at=time.time())
            record.state = state
            record.tasks[req.test]["status"] = "done"
            _audit(record, "test",
                   {"test": req.test, "seed": req.seed, "level": req.level,
                    "permutations": req.permutations},
                   STEP_TESTING, STEP_TESTING)
            store.persist(record)

    @api.post("/sessions/{sid}/tests")
    async def post_test(sid: str, request: Request):
        record = store.get(sid)
        if record is None:
            return _not_found(sid)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse({"detail": "malformed JSON body"},
                                status_code=400)
        if not isinstance(body, dict) or "test" not in body:
            return JSONResponse({"detail": "body must carry a test key"},
                                status_code=400)
        name = body["test"]
        if name not in SYNC_TESTS + ASYNC_TESTS:
            return JSONResponse(
                {"detail": f"unknown test {name!r}; available: "
                           f"{', '.join(SYNC_TESTS + ASYNC_TESTS)}"},
                status_code=422)
        req = RunTest(name, seed=int(body.get("seed", 0)),
                      level=float(body.get("level", record.state.level)),
                      permutations=int(body.get("permutations", 200)))
        with record.lock:
            state = record.state
            if state.step != STEP_TESTING:
                return _illegal(IllegalSessionInput(
                    state.step, allowed_inputs(state.step)))
            if name in SYNC_TESTS:
                before = state.step
                try:
                    record.state = advance_session(state, req)
                except ValueError as exc:
                    return JSONResponse({"detail": str(exc)}, status_code=422)
                _audit(record, "test",
                       {"test": name, "seed": req.seed, "level": req.level,
                        "permutations": req.permutations},
                       before, record.state.step)
                store.persist(record)
                result = record.state.test_results[-1][1]
                return JSONResponse({"test": name, "status": "done",
                                     "result": result.to_dict()})
            # async path: validate now, compute off-thread from an immutable
            # snapshot, merge under the lock when the result lands
            task = record.tasks.get(name)
            if task is not None and task["status"] == "running":
                return JSONResponse(
                    {"detail": f"test {name!r} is already running"},
                    status_code=409)
            try:
                pair = state.pair()
            except ValueError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            record.tasks[name] = {"status": "running", "error": None,
                                  "requested_at": time.time()}
            store.persist(record)
        if name == "mmd":
            def compute():
                return mmd_permutation_test(pair.source, pair.target,
                                            permutations=req.permutations,
                                            seed=req.seed)
        else:
            def compute():
                return model_well_specification(pair, seed=req.seed)
        threading.Thread(target=_land_async_result,
                         args=(record, req, compute), daemon=True).start()
        return JSONResponse({"test": name, "status": "running"},
                            status_code=202)

    # -- density overlays ---------------------------------------------------------

    @api.get("/sessions/{sid}/density")
    def get_density(sid: str):
        record = store.get(sid)
        if record is None:
            return _not_found(sid)
        with record.lock:
            s = record.state
            if s.source is None or s.target is None:
                return JSONResponse(
                    {"detail": "both datasets are required before testing"},
                    status_code=409)
            source, target = s.source, s.target
        dims = []
        for j in range(source.d):
            xs, xt = source.column(j), target.column(j)
            ks, kt = fit_kde(xs), fit_kde(xt)
            pad = 3.0 * max(ks.bandwidth[0], kt.bandwidth[0])
            lo = min(xs.min(), xt.min()) - pad
            hi = max(xs.max(), xt.max()) + pad
            grid = np.linspace(lo, hi, DENSITY_GRID_POINTS)
            dims.append({
                "dimension": j,
                "grid": [float(v) for v in grid],
                "source": [float(v) for v in ks.density(grid)],
                "target": [float(v) for v in kt.density(grid)],
            })
        return JSONResponse({"dimensions": dims})

    # -- cases and meta ---------------------------------------------------------

    @api.get("/cases")
    def get_cases():
        out = []
        for case_id, meta in CANNED_CASES.items():
            entry = dict(meta)
            entry["id"] = case_id
            out.append(entry)
        return JSONResponse({"cases": out})

    @api.get("/openapi.json")
    def get_openapi():
        return JSONResponse(app.openapi())

    app.include_router(api)

    @app.get("/healthz")
    def healthz():
        return JSONResponse({"status": "ok", "version": __version__})

    @app.get("/bootstrap.json")
    def bootstrap():
        return JSONResponse({"api_base": "/api/v1", "token_required": True,
                             "service": "shiftscope", "version": __version__})

    bundle = frontend_dir
    if bundle is None:
        here = os.path.dirname(os.path.abspath(__file__))
        for candidate in (os.path.join(os.getcwd(), "frontend", "dist"),
                          os.path.normpath(os.path.join(
                              here, "..", "..", "frontend", "dist"))):
            if os.path.isdir(candidate):
                bundle = candidate
                break
    if bundle is not None and os.path.isdir(bundle):
        app.mount("/", StaticFiles(directory=bundle, html=True),
                  name="wizard")

    return app
