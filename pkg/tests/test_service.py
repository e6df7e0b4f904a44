import pytest
from fastapi.testclient import TestClient

from artqa.service.app import create_app


@pytest.fixture(scope="module")
def client(toy_engine):
    return TestClient(create_app(toy_engine))


class TestHealth:
    def test_reports_dims_and_artifacts(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert body["question_dim"] == 1024
        assert body["image_dim"] == 2048
        assert body["paintings"] == 10
        assert body["comments"] == 20
        assert body["qa_records"] == 50
        assert body["models"] == {"selector": True, "reranker": True, "visual": True}
        assert body["config_hash"]


class TestRetrieve:
    def test_both_stage_scores(self, client):
        resp = client.post("/retrieve", json={"question": "Who painted the milkmaid in Delft ?", "k": 5})
        assert resp.status_code == 200
        results = resp.json()["results"]
        assert len(results) == 5
        assert results[0]["comment_id"] == "c03"
        assert all(r["stage2_score"] is not None for r in results)
        assert all(r["text"] for r in results)

    def test_rerank_can_be_disabled(self, client):
        resp = client.post("/retrieve", json={"question": "the bull", "k": 3, "rerank": False})
        assert resp.status_code == 200
        assert all(r["stage2_score"] is None for r in resp.json()["results"])

    def test_validation_error_on_empty_question(self, client):
        assert client.post("/retrieve", json={"question": "", "k": 3}).status_code == 422

    def test_validation_error_on_bad_k(self, client):
        assert client.post("/retrieve", json={"question": "x", "k": 0}).status_code == 422


class TestRoute:
    def test_routes_question(self, client):
        resp = client.post("/route", json={"question": "Who painted the milkmaid in Delft ?", "painting_id": "p02"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["modality"] in ("visual", "knowledge")
        assert 0.0 < body["probability"] < 1.0

    def test_unknown_painting_404(self, client):
        resp = client.post("/route", json={"question": "x ?", "painting_id": "p99"})
        assert resp.status_code == 404


class TestAnswer:
    def test_knowledge_answer_carries_support(self, client):
        resp = client.post(
            "/answer",
            json={"question": "Who painted the milkmaid in Delft ?", "force_branch": "knowledge"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["branch"] == "knowledge"
        assert body["support"]["comment_id"] == "c03"
        assert body["trace"]["retrieved"]

    def test_visual_answer_in_vocabulary(self, client, toy_engine):
        resp = client.post(
            "/answer",
            json={"question": "What color is the apron ?", "painting_id": "p02", "force_branch": "visual"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["branch"] == "visual"
        assert body["text"] in toy_engine.vocabulary
        assert body["support"] is None

    def test_learned_routing_used_without_force(self, client):
        resp = client.post("/answer", json={"question": "Who painted the milkmaid in Delft ?", "painting_id": "p02"})
        assert resp.status_code == 200
        assert resp.json()["trace"]["probability"] is not None

    def test_unknown_painting_404(self, client):
        resp = client.post("/answer", json={"question": "x ?", "painting_id": "nope"})
        assert resp.status_code == 404


class TestStats:
    def test_overall(self, client):
        resp = client.get("/stats")
        assert resp.status_code == 200
        body = resp.json()
        assert body["qa_pairs"] == 50
        assert body["visual"] == 20

    def test_split_filter(self, client):
        resp = client.get("/stats", params={"split": "test"})
        assert resp.json()["qa_pairs"] == 12

    def test_bad_split(self, client):
        assert client.get("/stats", params={"split": "dev"}).status_code == 422


class TestQgen:
    def test_generates_candidates(self, client):
        goya = "(S (NP (NNP Goya)) (VP (VBD depicted) (NP (NNP Napoleon)) (PP (IN in) (NP (CD 1814)))) (. .))"
        resp = client.post("/qgen", json={"parses": [goya], "max_per_sentence": 2})
        assert resp.status_code == 200
        cands = resp.json()["candidates"]
        assert len(cands) == 2
        assert cands[0]["question"] == "Who depicted Napoleon in 1814 ?"
        assert cands[0]["answer"] == "Goya"

    def test_bad_parse_rejected(self, client):
        assert client.post("/qgen", json={"parses": ["(("]}).status_code == 422


@pytest.fixture(scope="module")
def server_url(toy_engine):
    import socket
    import threading
    import time

    import uvicorn

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(create_app(toy_engine), host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            pytest.fail("uvicorn did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestCliThinClient:
    """CLI retrieve/answer against a real uvicorn server over HTTP."""

    def test_retrieve_via_server(self, server_url, capsys):
        import json as json_mod

        from artqa.cli import main

        code = main(["retrieve", "--server", server_url, "--question", "Who painted the milkmaid in Delft ?", "--k", "4"])
        out = capsys.readouterr().out
        assert code == 0
        rows = [json_mod.loads(l) for l in out.strip().splitlines()]
        assert len(rows) == 4
        assert rows[0]["comment_id"] == "c03"

    def test_answer_via_server(self, server_url, capsys):
        import json as json_mod

        from artqa.cli import main

        code = main(["answer", "--server", server_url, "--question", "Who painted the milkmaid in Delft ?"])
        out = capsys.readouterr().out
        assert code == 0
        body = json_mod.loads(out)
        assert body["branch"] in ("visual", "knowledge")
