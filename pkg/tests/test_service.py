"""Session server: wire ordering, serialization, capacity, reconnect."""

import json

import pytest
from fastapi.testclient import TestClient

from tourguide.runner import replay
from tourguide.service import build_app
from tourguide.llm import ScriptedMockBackend


@pytest.fixture()
def app(server_config, resources):
    return build_app(server_config, resources)


@pytest.fixture()
def client(app):
    with TestClient(app) as test_client:
        yield test_client


def send_utterance(ws, text):
    ws.send_text(json.dumps({"kind": "customer_utterance", "payload": {"text": text}}))


def read_until(ws, kind, limit=200):
    """Collect messages until one of `kind` arrives (inclusive)."""
    received = []
    for _ in range(limit):
        message = ws.receive_json()
        received.append(message)
        if message["kind"] == kind:
            return received
    raise AssertionError(f"no {kind!r} message within {limit} messages: {[m['kind'] for m in received]}")


class TestHttpSurface:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_create_session_buffers_greeting(self, client):
        response = client.post("/sessions")
        assert response.status_code == 201
        body = response.json()
        assert body["session_id"]
        assert body["buffered_messages"] >= 3  # phase_changed + segments + display

    def test_capacity_exceeded(self, client, server_config):
        for _ in range(server_config.max_sessions):
            assert client.post("/sessions").status_code == 201
        overflow = client.post("/sessions")
        assert overflow.status_code == 409
        assert overflow.json()["error"] == "capacity-exceeded"

    def test_backend_down_fails_fast_and_persists_nothing(self, tmp_path, resources):
        from tourguide.config import ServerConfig

        config = ServerConfig(
            backend_kind="remote",
            api_base="http://127.0.0.1:9",  # nothing listens here
            max_retries=0,
            log_dir=str(tmp_path / "logs"),
        )
        app = build_app(config, resources)
        with TestClient(app) as client:
            response = client.post("/sessions")
            assert response.status_code == 503
            assert response.json()["error"] == "backend-unavailable"
            assert app.state.host.sessions == {}


class TestGreetingDelivery:
    def test_greeting_block_order_and_bow(self, client):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            messages = read_until(ws, "action_cue")
        kinds = [m["kind"] for m in messages]
        assert kinds[0] == "phase_changed"
        assert messages[0]["payload"]["phase"] == 1
        assert "speech_segment" in kinds
        assert kinds.index("display_state") > kinds.index("speech_segment")
        assert messages[-1]["payload"] == {"kind": "bow", "timing": "phase_entry"}

    def test_unknown_session_socket_closed(self, client):
        from starlette.websockets import WebSocketDisconnect

        with pytest.raises(WebSocketDisconnect) as excinfo:
            with client.websocket_connect("/ws/nope"):
                pass
        assert excinfo.value.code == 4404


class TestTurnDelivery:
    def test_turn_block_order_and_seq(self, client):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")  # greeting block
            send_utterance(ws, "こんにちは。京都に行きたいです")
            messages = read_until(ws, "display_state")
        kinds = [m["kind"] for m in messages]
        assert kinds[0] == "customer_utterance"
        assert kinds[1] == "speech_segment"
        assert kinds[-1] == "display_state"
        assert all(k == "speech_segment" for k in kinds[1:-1])

    def test_seq_strictly_increases(self, client, full_script):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")
            for line in full_script.customer_lines:
                send_utterance(ws, line)
            messages = read_until(ws, "session_closed")
        seqs = [m["seq"] for m in messages]
        assert all(b > a for a, b in zip(seqs, seqs[1:]))

    def test_full_session_over_socket(self, client, full_script):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            greeting = read_until(ws, "action_cue")
            for line in full_script.customer_lines:
                send_utterance(ws, line)
            messages = greeting + read_until(ws, "session_closed")

        kinds = [m["kind"] for m in messages]
        # one advance per utterance: echoes match what we sent, in order
        echoes = [m["payload"]["text"] for m in messages if m["kind"] == "customer_utterance"]
        assert echoes == list(full_script.customer_lines)
        # no speech_segment after its turn's display_state
        for i, m in enumerate(messages):
            if m["kind"] == "customer_utterance":
                block = []
                for later in messages[i + 1 :]:
                    if later["kind"] == "customer_utterance":
                        break
                    block.append(later["kind"])
                assert "speech_segment" in block
                seg_last = max(j for j, k in enumerate(block) if k == "speech_segment")
                display_at = block.index("display_state")
                assert seg_last < display_at
        # phase flow observed on the wire
        phases = [m["payload"]["phase"] for m in messages if m["kind"] == "phase_changed"]
        assert phases == [1, 2, 3, 4, 5]
        closed = messages[-1]
        assert closed["payload"]["status"] == "closed"
        plan = closed["payload"]["plan"]
        assert len(plan["spots"]) == 2
        assert plan["route"]["total_minutes"] > 0
        assert len(plan["schedule"]["entries"]) == 3

    def test_no_segment_contains_end_sign(self, client, full_script):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")
            for line in full_script.customer_lines:
                send_utterance(ws, line)
            messages = read_until(ws, "session_closed")
        for m in messages:
            if m["kind"] == "speech_segment":
                assert "[END]" not in m["payload"]["text"]

    def test_rapid_utterances_never_interleave(self, client, app):
        host = app.state.host
        original_factory = host._make_gateway

        def slow_gateway():
            gateway = original_factory()
            gateway._backend = ScriptedMockBackend(
                ["いらっしゃいませ。", "一つ目の返事です。", "二つ目の返事です。"],
                latency=0.15,
            )
            return gateway

        host._make_gateway = slow_gateway
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")
            send_utterance(ws, "一問目")
            send_utterance(ws, "二問目")
            messages = read_until(ws, "display_state")
            messages += read_until(ws, "display_state")
        kinds_and_text = [
            (m["kind"], m["payload"].get("text", "")) for m in messages
        ]
        # Turn 2's echo comes only after turn 1's display_state: no interleave.
        display_positions = [i for i, m in enumerate(messages) if m["kind"] == "display_state"]
        echo_positions = [i for i, m in enumerate(messages) if m["kind"] == "customer_utterance"]
        assert len(display_positions) == 2 and len(echo_positions) == 2
        assert echo_positions[1] > display_positions[0], kinds_and_text

    def test_error_paths_over_socket(self, client, full_script):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")
            send_utterance(ws, "   ")
            error = read_until(ws, "error")[-1]
            assert error["payload"]["code"] == "utterance-rejected"
            # run to completion, then poke the closed session
            for line in full_script.customer_lines:
                send_utterance(ws, line)
            read_until(ws, "session_closed")
            send_utterance(ws, "まだいますか")
            error = read_until(ws, "error")[-1]
            assert error["payload"]["code"] == "session-not-active"


class TestReconnect:
    def test_snapshot_rebuilds_view(self, client):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")
            send_utterance(ws, "こんにちは")
            read_until(ws, "display_state")
        # reconnect: snapshot first (nothing else is pending)
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            snapshot = [ws.receive_json(), ws.receive_json()]
        assert [m["kind"] for m in snapshot] == ["phase_changed", "display_state"]
        assert snapshot[0]["payload"]["via"] == "snapshot"

    def test_messages_not_lost_nor_duplicated_across_reconnect(self, client):
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            first_batch = read_until(ws, "action_cue")
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            # snapshot only; greeting must not be re-sent
            second_batch = [ws.receive_json(), ws.receive_json()]
        first_seqs = {m["seq"] for m in first_batch}
        second_seqs = {m["seq"] for m in second_batch}
        assert not (first_seqs & second_seqs)


class TestTranscriptPersistence:
    def test_server_transcript_replays_to_same_phase(self, client, app, full_script, resources):
        host = app.state.host
        session_id = client.post("/sessions").json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            read_until(ws, "action_cue")
            for line in full_script.customer_lines:
                send_utterance(ws, line)
            read_until(ws, "session_closed")
        path = host.transcript_path(session_id)
        assert path.exists()
        live = host.sessions[session_id].engine.state
        rerun = replay(path, resources=resources)
        assert rerun.state.current_phase is live.current_phase
        assert rerun.state.status is live.status
        assert rerun.final_display.slot_names() == live.display.slot_names()
