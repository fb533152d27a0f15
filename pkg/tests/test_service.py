import threading

import pytest
import requests

from conftest import tiny_model
from diagseq.data import build_vocab
from diagseq.inference import InferenceConfig
from diagseq.service import ApiError, SessionService, make_server
from diagseq.synthetic import acceptance_spec, generate_synthetic


@pytest.fixture(scope="module")
def served():
    spec = acceptance_spec(n_diseases=3, n_symptoms=10)
    records = generate_synthetic(spec, 60, seed=8)
    vocab = build_vocab(records)
    model = tiny_model(vocab, seed=4)
    cfg = InferenceConfig(rho_p=0.001, max_turns=6)
    server = make_server(model, vocab, cfg, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, vocab, model, cfg
    server.shutdown()
    server.server_close()


def create(base, explicit):
    return requests.post(f"{base}/sessions", json={"explicit": explicit}, timeout=10)


def play(base, explicit, answer="not_sure", max_steps=50):
    """Answer every question the same way; return the transcript and view."""
    view = create(base, explicit).json()
    questions = []
    while view["status"] == "awaiting_answer" and len(questions) < max_steps:
        questions.append(view["question"])
        view = requests.post(f"{base}/sessions/{view['id']}/answer",
                             json={"answer": answer}, timeout=10).json()
    return questions, view


class TestEndpoints:
    def test_vocab_catalog(self, served):
        base, vocab, _, _ = served
        payload = requests.get(f"{base}/vocab", timeout=10).json()
        assert payload["symptoms"] == list(vocab.symptoms)
        assert payload["diseases"] == list(vocab.diseases)

    def test_create_returns_question(self, served):
        base, vocab, _, _ = served
        resp = create(base, {vocab.symptoms[0]: True, vocab.symptoms[1]: True})
        assert resp.status_code == 201
        view = resp.json()
        assert view["status"] == "awaiting_answer"
        assert view["question"] in vocab.symptoms
        assert view["turns"] == 0
        assert [k["symptom"] for k in view["known"]] == [vocab.symptoms[0], vocab.symptoms[1]]

    def test_get_snapshot(self, served):
        base, vocab, _, _ = served
        sid = create(base, {vocab.symptoms[0]: True}).json()["id"]
        view = requests.get(f"{base}/sessions/{sid}", timeout=10).json()
        assert view["id"] == sid
        assert view["status"] == "awaiting_answer"

    def test_answer_advances_and_diagnoses(self, served):
        base, vocab, _, cfg = served
        questions, view = play(base, {vocab.symptoms[0]: True})
        assert view["status"] == "diagnosed"
        assert view["stop_reason"] in {"end_symbol", "low_probability",
                                       "turn_budget", "exhausted"}
        assert view["diagnosis"]["disease"] in vocab.diseases
        dist = view["diagnosis"]["distribution"]
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-3)
        assert view["turns"] <= cfg.max_turns
        assert [h["symptom"] for h in view["history"]] == questions

    def test_true_answers_become_known_symptoms(self, served):
        base, vocab, _, _ = served
        view = create(base, {vocab.symptoms[0]: True}).json()
        question = view["question"]
        view = requests.post(f"{base}/sessions/{view['id']}/answer",
                             json={"answer": "true"}, timeout=10).json()
        inquiry_known = [k for k in view["known"] if k["source"] == "inquiry"]
        assert inquiry_known == [{"symptom": question, "present": True, "source": "inquiry"}]

    def test_not_sure_answers_do_not(self, served):
        base, vocab, _, _ = served
        view = create(base, {vocab.symptoms[0]: True}).json()
        view = requests.post(f"{base}/sessions/{view['id']}/answer",
                             json={"answer": "not_sure"}, timeout=10).json()
        assert all(k["source"] == "explicit" for k in view["known"])
        assert view["turns"] == 1


class TestErrors:
    def test_unknown_session_404(self, served):
        base = served[0]
        assert requests.get(f"{base}/sessions/deadbeef", timeout=10).status_code == 404
        resp = requests.post(f"{base}/sessions/deadbeef/answer",
                             json={"answer": "true"}, timeout=10)
        assert resp.status_code == 404

    def test_answer_after_diagnosis_409(self, served):
        base, vocab, _, _ = served
        _, view = play(base, {vocab.symptoms[0]: True})
        resp = requests.post(f"{base}/sessions/{view['id']}/answer",
                             json={"answer": "true"}, timeout=10)
        assert resp.status_code == 409

    def test_malformed_bodies_400(self, served):
        base, vocab, _, _ = served
        assert create(base, {}).status_code == 400
        assert create(base, {"not a symptom": True}).status_code == 400
        assert create(base, {vocab.symptoms[0]: "yes"}).status_code == 400
        sid = create(base, {vocab.symptoms[0]: True}).json()["id"]
        resp = requests.post(f"{base}/sessions/{sid}/answer",
                             json={"answer": "maybe"}, timeout=10)
        assert resp.status_code == 400
        resp = requests.post(f"{base}/sessions/{sid}/answer",
                             data="{oops", headers={"Content-Type": "application/json"},
                             timeout=10)
        assert resp.status_code == 400

    def test_unknown_path_404(self, served):
        base = served[0]
        assert requests.get(f"{base}/nope", timeout=10).status_code == 404

    def test_cors_preflight(self, served):
        base = served[0]
        resp = requests.options(f"{base}/sessions", timeout=10)
        assert resp.status_code == 204
        assert resp.headers["Access-Control-Allow-Origin"] == "*"


class TestSessionSemantics:
    def test_replay_is_deterministic(self, served):
        base, vocab, _, _ = served
        explicit = {vocab.symptoms[2]: True}
        first = play(base, explicit)
        second = play(base, explicit)
        assert first[0] == second[0]
        assert first[1]["diagnosis"] == second[1]["diagnosis"]
        assert first[1]["stop_reason"] == second[1]["stop_reason"]

    def test_sessions_are_isolated(self, served):
        base, vocab, _, _ = served
        a = create(base, {vocab.symptoms[0]: True}).json()
        b = create(base, {vocab.symptoms[3]: True}).json()
        # interleave answers; then replay each alone and compare
        views = {"a": a, "b": b}
        for _ in range(3):
            for key in ("a", "b"):
                view = views[key]
                if view["status"] == "awaiting_answer":
                    views[key] = requests.post(
                        f"{base}/sessions/{view['id']}/answer",
                        json={"answer": "not_sure"}, timeout=10).json()
        solo_a = play(base, {vocab.symptoms[0]: True}, max_steps=3)
        qa = [h["symptom"] for h in views["a"]["history"]]
        assert qa == solo_a[0][:len(qa)]
        assert views["a"]["known"][0]["symptom"] == vocab.symptoms[0]
        assert views["b"]["known"][0]["symptom"] == vocab.symptoms[3]

    def test_matches_direct_engine_run(self, served):
        """The HTTP path and the library path produce identical dialogues."""
        from diagseq.data import Answer
        from diagseq.inference import run_dialogue

        base, vocab, model, cfg = served
        explicit = {vocab.symptoms[5]: True}
        questions, view = play(base, explicit, answer="false")
        state = run_dialogue(lambda sid: Answer.FALSE, model, vocab, cfg,
                             [(vocab.symptom_id(n), v) for n, v in explicit.items()])
        assert [vocab.symptom_id(q) for q in questions] == [sid for sid, _ in state.acquired]
        assert view["turns"] == state.turns
        assert view["stop_reason"] == state.stop_reason.value
        assert view["diagnosis"]["disease"] == vocab.disease_name(state.diagnosis[0])


class TestImmediateDiagnosis:
    def test_create_diagnoses_when_stop_already_met(self, served):
        # a model that always wants to stop diagnoses in the create call
        _, vocab, _, _ = served
        model = tiny_model(vocab, seed=9)
        model.params["head_sym.b"].data[...] = 0.0
        model.params["head_sym.b"].data[vocab.end_class] = 50.0
        service = SessionService(model, vocab, InferenceConfig())
        view = service.create_session({"explicit": {vocab.symptoms[0]: True}})
        assert view["status"] == "diagnosed"
        assert view["question"] is None
        assert view["turns"] == 0
        assert view["stop_reason"] == "end_symbol"
        assert view["diagnosis"]["disease"] in vocab.diseases


class TestExpiry:
    def test_expired_sessions_conflict(self, served):
        _, vocab, model, cfg = served
        now = [1000.0]
        service = SessionService(model, vocab, cfg, ttl=60, clock=lambda: now[0])
        view = service.create_session({"explicit": {vocab.symptoms[0]: True}})
        now[0] += 61
        assert service.get_session(view["id"])["status"] == "expired"
        with pytest.raises(ApiError) as err:
            service.answer_session(view["id"], {"answer": "true"})
        assert err.value.status == 409
        # swept away after 2 TTLs; then unknown
        now[0] += 600
        service._sweep()
        with pytest.raises(ApiError) as err:
            service.get_session(view["id"])
        assert err.value.status == 404
