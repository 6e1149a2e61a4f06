"""Gateway: REST endpoints, HILT sessions, plugin wiring and fallbacks."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from fastapi.testclient import TestClient

from skyloop.gateway import SessionQueue, create_app


@pytest.fixture()
def client():
    app = create_app()
    with TestClient(app) as c:
        yield c


def start_fast_run(client, scenario="S01A-tight-timing", seed=3, overrides=None):
    resp = client.post(
        "/v1/runs",
        json={"scenario_id": scenario, "seed": seed, "mode": "fast_time", "overrides": overrides or {}},
    )
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestRunEndpoints:
    def test_fast_run_finishes_with_metrics(self, client):
        handle = start_fast_run(client)
        assert handle["state"] == "finished"
        metrics = client.get(f"/v1/runs/{handle['run_id']}/metrics")
        assert metrics.status_code == 200
        body = metrics.json()
        assert body["warned"] is True
        assert body["asr_latency_ms"]["mean"] == 5880.0

    def test_unknown_scenario_404(self, client):
        resp = client.post("/v1/runs", json={"scenario_id": "nope", "seed": 1, "mode": "fast_time"})
        assert resp.status_code == 404

    def test_invalid_override_422(self, client):
        resp = client.post(
            "/v1/runs",
            json={"scenario_id": "S01A-nominal", "seed": 1, "mode": "fast_time",
                  "overrides": {"bogus": 1}},
        )
        assert resp.status_code == 422

    def test_run_handle_and_log(self, client):
        handle = start_fast_run(client)
        got = client.get(f"/v1/runs/{handle['run_id']}")
        assert got.json()["state"] == "finished"
        log = client.get(f"/v1/runs/{handle['run_id']}/log")
        assert log.status_code == 200
        lines = log.text.strip().splitlines()
        assert json.loads(lines[0])["kind"] == "run_start"
        assert json.loads(lines[-1])["kind"] == "run_end"

    def test_unknown_run_404(self, client):
        assert client.get("/v1/runs/zzz").status_code == 404
        assert client.get("/v1/runs/zzz/metrics").status_code == 404

    def test_scenario_listing(self, client):
        resp = client.get("/v1/scenarios")
        assert "S01A-bad-readback" in resp.json()["scenarios"]

    def test_run_scenario_document(self, client):
        handle = start_fast_run(client)
        doc = client.get(f"/v1/runs/{handle['run_id']}/scenario")
        assert doc.status_code == 200
        body = doc.json()
        assert body["scenario_id"] == "S01A-tight-timing"
        assert body["geometry"]["runways"][0]["id"] == "01/19"

    def test_human_turn_record_schema_matches_scripted(self, client):
        resp = client.post(
            "/v1/runs",
            json={"scenario_id": "S01A-nominal", "seed": 1, "mode": "real_time", "pace": 400.0},
        )
        run_id = resp.json()["run_id"]
        with client.websocket_connect(f"/v1/runs/{run_id}/session") as ws:
            ws.send_json({"kind": "role_claim", "payload": {"actor_id": "N123AB"}})
            msg = ws.receive_json()
            while msg["kind"] != "role_grant":
                msg = ws.receive_json()
            ws.send_json(
                {"kind": "transmit_request",
                 "payload": {"frequency": "118.30", "addressed_to": None,
                             "text": "cleared to land runway zero one, N123AB"}}
            )
            msg = ws.receive_json()
            while msg["kind"] != "ack_transmit":
                msg = ws.receive_json()
        import time as _time

        deadline = _time.time() + 10
        while _time.time() < deadline:
            if client.get(f"/v1/runs/{run_id}").json()["state"] == "finished":
                break
            _time.sleep(0.2)
        log = client.get(f"/v1/runs/{run_id}/log").text
        turns = [
            json.loads(line)["payload"]
            for line in log.splitlines()
            if json.loads(line)["kind"] == "radio_turn"
        ]
        human = [t for t in turns if t["provenance"] == "human"]
        scripted = [t for t in turns if t["provenance"] == "scripted"]
        assert human and scripted
        # Identical schema except the provenance field value.
        assert set(human[0]) == set(scripted[0])


class TestSessionQueue:
    def test_snapshot_overflow_drops_oldest_only(self):
        q = SessionQueue(cap=256)
        q.push("radio_turn", {"turn_id": "T1"}, 0)
        for i in range(1000):
            q.push("track_snapshot", {"i": i}, i)
        q.push("advisory", {"advisory_id": "a"}, 1001)
        q.push("clock", {"sim_now_ms": 1002}, 1002)

        items = []
        while True:
            item = q.pop(timeout=0.01)
            if item is None:
                break
            items.append(item)
        kinds = [i["kind"] for i in items]
        assert kinds.count("track_snapshot") == 256
        assert kinds.count("radio_turn") == 1           # never dropped
        assert kinds.count("advisory") == 1             # never dropped
        snapshots = [i for i in items if i["kind"] == "track_snapshot"]
        assert snapshots[0]["payload"]["i"] == 1000 - 256  # oldest dropped
        clock = next(i for i in items if i["kind"] == "clock")
        assert clock["payload"]["dropped_snapshots"] == 1000 - 256

    def test_fifo_order_preserved(self):
        q = SessionQueue()
        for i in range(5):
            q.push("radio_turn", {"i": i}, i)
        seen = [q.pop(0.01)["payload"]["i"] for _ in range(5)]
        assert seen == [0, 1, 2, 3, 4]


class TestSessions:
    def test_session_rejected_on_fast_time_run(self, client):
        handle = start_fast_run(client)
        with client.websocket_connect(f"/v1/runs/{handle['run_id']}/session") as ws:
            msg = ws.receive_json()
            assert msg["kind"] == "error"
            assert "real_time" in msg["payload"]["detail"]

    def test_real_time_session_claim_and_transmit(self, client):
        resp = client.post(
            "/v1/runs",
            json={
                "scenario_id": "S01A-bad-readback",
                "seed": 42,
                "mode": "real_time",
                "pace": 400.0,
            },
        )
        assert resp.status_code == 201
        run_id = resp.json()["run_id"]
        with client.websocket_connect(f"/v1/runs/{run_id}/session") as ws:
            ws.send_json({"kind": "role_claim", "payload": {"actor_id": "tower"}})
            deadline = time.time() + 10
            granted = False
            heard_pilot_readback = False
            acked = None
            sent = False
            while time.time() < deadline:
                msg = ws.receive_json()
                if msg["kind"] == "role_grant":
                    granted = True
                    ws.send_json(
                        {
                            "kind": "transmit_request",
                            "payload": {
                                "frequency": "118.30",
                                "addressed_to": "N456CD",
                                "text": "N456CD, cleared for takeoff runway zero one",
                            },
                        }
                    )
                    sent = True
                elif msg["kind"] == "ack_transmit":
                    acked = msg["payload"]["turn_id"]
                elif msg["kind"] == "radio_turn":
                    text = msg["payload"]["clean_text"]
                    if msg["payload"]["speaker"] == "N456CD" and "cleared for takeoff" in text:
                        heard_pilot_readback = True
                        break
            assert granted and sent
            assert acked and acked.startswith("human-")
            assert heard_pilot_readback

    def test_double_claim_conflict_over_two_sessions(self, client):
        resp = client.post(
            "/v1/runs",
            json={"scenario_id": "S01A-nominal", "seed": 1, "mode": "real_time", "pace": 400.0},
        )
        run_id = resp.json()["run_id"]
        with client.websocket_connect(f"/v1/runs/{run_id}/session") as ws1:
            ws1.send_json({"kind": "role_claim", "payload": {"actor_id": "tower"}})
            msg = ws1.receive_json()
            while msg["kind"] not in ("role_grant", "error"):
                msg = ws1.receive_json()
            assert msg["kind"] == "role_grant"
            with client.websocket_connect(f"/v1/runs/{run_id}/session") as ws2:
                ws2.send_json({"kind": "role_claim", "payload": {"actor_id": "tower"}})
                msg2 = ws2.receive_json()
                while msg2["kind"] not in ("role_grant", "error"):
                    msg2 = ws2.receive_json()
                assert msg2["kind"] == "error"
                assert "claimed" in msg2["payload"]["detail"]

    def test_transmit_without_claim_rejected(self, client):
        resp = client.post(
            "/v1/runs",
            json={"scenario_id": "S01A-nominal", "seed": 1, "mode": "real_time", "pace": 400.0},
        )
        run_id = resp.json()["run_id"]
        with client.websocket_connect(f"/v1/runs/{run_id}/session") as ws:
            ws.send_json(
                {"kind": "transmit_request",
                 "payload": {"frequency": "118.30", "text": "hello"}}
            )
            msg = ws.receive_json()
            while msg["kind"] != "error":
                msg = ws.receive_json()
            assert "no role claimed" in msg["payload"]["detail"]

    def test_empty_text_rejected(self, client):
        resp = client.post(
            "/v1/runs",
            json={"scenario_id": "S01A-nominal", "seed": 1, "mode": "real_time", "pace": 400.0},
        )
        run_id = resp.json()["run_id"]
        with client.websocket_connect(f"/v1/runs/{run_id}/session") as ws:
            ws.send_json({"kind": "role_claim", "payload": {"actor_id": "tower"}})
            msg = ws.receive_json()
            while msg["kind"] != "role_grant":
                msg = ws.receive_json()
            ws.send_json(
                {"kind": "transmit_request", "payload": {"frequency": "118.30", "text": "  "}}
            )
            msg = ws.receive_json()
            while msg["kind"] != "error":
                msg = ws.receive_json()
            assert "empty text" in msg["payload"]["detail"]


class _PluginHandler(BaseHTTPRequestHandler):
    behavior = "echo_caution"

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length) or b"{}")
        if self.path == "/decide":
            if self.behavior == "echo_caution":
                payload = {
                    "type": "plugin_advisory",
                    "severity": "CAUTION",
                    "message": "plugin caution",
                    "recipients": ["controller"],
                }
            else:
                payload = {"severity": "PANIC", "message": "bad"}
        elif self.path == "/transcribe":
            payload = {
                "transcript": body["audio_text"],
                "confidence": max(0.0, 1.0 - 1.5 * body["channel_p_err"]),
                "latency_ms": 5880,
            }
        elif self.path == "/rewrite":
            payload = {"message": "REWRITTEN: " + body["message"]}
        else:
            self.send_response(404)
            self.end_headers()
            return
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def plugin_server():
    server = HTTPServer(("127.0.0.1", 0), _PluginHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestPlugins:
    def test_plugin_registration_and_listing(self, client):
        resp = client.put("/v1/plugins/decision", json={"base_url": "http://localhost:9", "timeout_ms": 100})
        assert resp.status_code == 200
        listed = client.get("/v1/plugins").json()["plugins"]
        assert listed[0]["role"] == "decision"

    def test_unknown_role_404(self, client):
        assert client.put("/v1/plugins/oracle", json={"base_url": "x"}).status_code == 404

    def test_decision_plugin_advisory_delivered_with_provenance(self, client, plugin_server):
        _PluginHandler.behavior = "echo_caution"
        client.put("/v1/plugins/decision", json={"base_url": plugin_server, "timeout_ms": 2000})
        handle = start_fast_run(client, scenario="S01A-nominal", seed=1)
        log = client.get(f"/v1/runs/{handle['run_id']}/log").text
        advisories = [
            json.loads(line)["payload"]
            for line in log.splitlines()
            if json.loads(line)["kind"] == "advisory"
        ]
        assert advisories
        assert all(a["provenance"] == "plugin" for a in advisories)
        assert advisories[0]["message"] == "plugin caution"

    def test_invalid_severity_falls_back_to_builtin(self, client, plugin_server):
        _PluginHandler.behavior = "panic"
        client.put("/v1/plugins/decision", json={"base_url": plugin_server, "timeout_ms": 2000})
        handle = start_fast_run(client, scenario="S01A-tight-timing", seed=3)
        log = client.get(f"/v1/runs/{handle['run_id']}/log").text
        advisories = [
            json.loads(line)["payload"]
            for line in log.splitlines()
            if json.loads(line)["kind"] == "advisory"
        ]
        assert advisories
        assert all(a["provenance"] == "builtin" for a in advisories)

    def test_unreachable_endpoint_falls_back_and_logs(self, client):
        client.put("/v1/plugins/decision", json={"base_url": "http://127.0.0.1:1", "timeout_ms": 200})
        handle = start_fast_run(client, scenario="S01A-tight-timing", seed=3)
        metrics = client.get(f"/v1/runs/{handle['run_id']}/metrics").json()
        assert metrics["warned"] is True    # builtin engine carried the run
        fallbacks = client.get("/v1/plugins").json()["fallbacks"]
        assert fallbacks and fallbacks[0]["role"] == "decision"

    def test_nlg_plugin_rewrites_message_not_severity(self, client, plugin_server):
        _PluginHandler.behavior = "echo_caution"
        client.put("/v1/plugins/nlg", json={"base_url": plugin_server, "timeout_ms": 2000})
        handle = start_fast_run(client, scenario="S01A-tight-timing", seed=3)
        log = client.get(f"/v1/runs/{handle['run_id']}/log").text
        advisories = [
            json.loads(line)["payload"]
            for line in log.splitlines()
            if json.loads(line)["kind"] == "advisory"
        ]
        rewritten = [a for a in advisories if a["message"].startswith("REWRITTEN:")]
        assert rewritten
        assert any(a["severity"] == "WARNING" for a in rewritten)

    def test_asr_echo_plugin_metrics_match_builtin(self, client, plugin_server):
        # Transparency: an echo ASR plugin with the builtin's latency and
        # confidence yields exactly the builtin run's metrics.
        overrides = {"asr.word_error_rate": 0.0}
        baseline = start_fast_run(client, scenario="S01A-tight-timing", seed=3, overrides=overrides)
        base_metrics = client.get(f"/v1/runs/{baseline['run_id']}/metrics").json()

        client.put("/v1/plugins/asr", json={"base_url": plugin_server, "timeout_ms": 3000})
        plugged = start_fast_run(client, scenario="S01A-tight-timing", seed=3, overrides=overrides)
        plug_metrics = client.get(f"/v1/runs/{plugged['run_id']}/metrics").json()
        assert plug_metrics == base_metrics
