"""Interactive diagnosis over HTTP.

Small JSON API on the standard-library threading HTTP server; the browser
UI (or any scripted client) plays the role the simulator plays during
evaluation, answering one inquiry at a time:

    GET  /vocab                   symptom/disease catalogs
    POST /sessions                {"explicit": {"cough": true, ...}}
    GET  /sessions/{id}           session snapshot
    POST /sessions/{id}/answer    {"answer": "true"|"false"|"not_sure"}

Sessions live in memory with TTL expiry and one lock each; the model is
shared read-only.  Every dialogue runs through the same DialogueEngine the
evaluator uses, so a scripted session replays identically to CLI eval.
"""

import json
import re
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .data import Answer
from .inference import DialogueEngine

DEFAULT_TTL_SECONDS = 30 * 60


class ApiError(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status
        self.message = message


class Session:
    def __init__(self, sid, engine, now):
        self.id = sid
        self.engine = engine
        self.history = []  # (symptom name, answer wire value)
        self.created = now
        self.updated = now
        self.lock = threading.Lock()


class SessionService:
    """Request-handling core, independent of the HTTP plumbing."""

    def __init__(self, model, vocab, inference_config, ttl=DEFAULT_TTL_SECONDS,
                 clock=time.time):
        self.model = model
        self.vocab = vocab
        self.inference_config = inference_config
        self.ttl = ttl
        self.clock = clock
        self._sessions = {}
        self._lock = threading.Lock()

    # -- helpers --------------------------------------------------------

    def _expired(self, session):
        return self.clock() - session.updated > self.ttl

    def _sweep(self):
        cutoff = self.clock() - 2 * self.ttl
        with self._lock:
            for sid in [s for s, sess in self._sessions.items() if sess.updated < cutoff]:
                del self._sessions[sid]

    def _get(self, sid):
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise ApiError(404, f"unknown session {sid!r}")
        return session

    def _status(self, session):
        if self._expired(session):
            return "expired"
        return "diagnosed" if session.engine.done else "awaiting_answer"

    def view(self, session):
        engine = session.engine
        state = engine.state
        status = self._status(session)
        question = None
        if status == "awaiting_answer" and engine.pending_question is not None:
            question = self.vocab.symptom_name(engine.pending_question)
        diagnosis = None
        if state.diagnosis is not None:
            did, prob = state.diagnosis
            diagnosis = {
                "disease": self.vocab.disease_name(did),
                "probability": prob,
                "distribution": {self.vocab.disease_name(i): float(p)
                                 for i, p in enumerate(state.distribution)},
            }
        return {
            "id": session.id,
            "status": status,
            "question": question,
            "history": [{"symptom": s, "answer": a} for s, a in session.history],
            "known": [
                {"symptom": self.vocab.symptom_name(sid), "present": present,
                 "source": "explicit" if i < state.explicit_len else "inquiry"}
                for i, (sid, present) in enumerate(state.known)
            ],
            "turns": state.turns,
            "stop_reason": state.stop_reason.value if state.stop_reason else None,
            "diagnosis": diagnosis,
        }

    # -- endpoints --------------------------------------------------------

    def vocab_payload(self):
        return {"symptoms": list(self.vocab.symptoms), "diseases": list(self.vocab.diseases)}

    def create_session(self, body):
        explicit = body.get("explicit") if isinstance(body, dict) else None
        if not isinstance(explicit, dict) or not explicit:
            raise ApiError(400, "body must be {\"explicit\": {symptom: bool, ...}} with at least one symptom")
        items = []
        for name, present in explicit.items():
            if not isinstance(present, bool):
                raise ApiError(400, f"explicit symptom {name!r} must map to true/false")
            try:
                items.append((self.vocab.symptom_id(name), present))
            except KeyError:
                raise ApiError(400, f"unknown symptom {name!r}") from None
        self._sweep()
        engine = DialogueEngine(self.model, self.vocab, self.inference_config, items)
        session = Session(uuid.uuid4().hex, engine, self.clock())
        with self._lock:
            self._sessions[session.id] = session
        with session.lock:
            return self.view(session)

    def get_session(self, sid):
        session = self._get(sid)
        with session.lock:
            return self.view(session)

    def answer_session(self, sid, body):
        session = self._get(sid)
        with session.lock:
            if self._expired(session):
                raise ApiError(409, "session expired")
            if session.engine.done:
                raise ApiError(409, "session already diagnosed")
            raw = body.get("answer") if isinstance(body, dict) else None
            try:
                answer = Answer.from_wire(raw)
            except ValueError as exc:
                raise ApiError(400, str(exc)) from None
            question = self.vocab.symptom_name(session.engine.pending_question)
            session.engine.submit_answer(answer)
            session.history.append((question, answer.value))
            session.updated = self.clock()
            return self.view(session)


_SESSION_RE = re.compile(r"^/sessions/([0-9a-f]+)$")
_ANSWER_RE = re.compile(r"^/sessions/([0-9a-f]+)/answer$")


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)

    def _send(self, status, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self._cors()
        self.end_headers()
        self.wfile.write(body)

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def _body(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "request body is not valid JSON") from None

    def _route(self):
        service = self.server.service
        if self.command == "GET" and self.path == "/vocab":
            return 200, service.vocab_payload()
        if self.command == "GET" and self.path == "/health":
            return 200, {"status": "ok"}
        if self.command == "POST" and self.path == "/sessions":
            return 201, service.create_session(self._body())
        match = _SESSION_RE.match(self.path)
        if match and self.command == "GET":
            return 200, service.get_session(match.group(1))
        match = _ANSWER_RE.match(self.path)
        if match and self.command == "POST":
            return 200, service.answer_session(match.group(1), self._body())
        raise ApiError(404, f"no such endpoint: {self.command} {self.path}")

    def _handle(self):
        try:
            status, payload = self._route()
            self._send(status, payload)
        except ApiError as exc:
            self._send(exc.status, {"error": exc.message})
        except Exception as exc:  # noqa: BLE001 - report, don't kill the thread
            self._send(500, {"error": f"internal error: {exc}"})

    def do_GET(self):
        self._handle()

    def do_POST(self):
        self._handle()

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()


def make_server(model, vocab, inference_config, host="127.0.0.1", port=8100,
                ttl=DEFAULT_TTL_SECONDS, verbose=False):
    server = ThreadingHTTPServer((host, port), _Handler)
    server.service = SessionService(model, vocab, inference_config, ttl=ttl)
    server.verbose = verbose
    return server
