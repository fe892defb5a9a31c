import json

import pytest
from fastapi.testclient import TestClient

from trustalloc.service import create_app
from trustalloc.world import load_bundled_scenario


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture()
def benchmark_body():
    return json.loads(load_bundled_scenario("paper_5x3.scn").dumps())


@pytest.fixture()
def demo_body():
    return json.loads(load_bundled_scenario("handover_demo.scn").dumps())


def create(client, body):
    response = client.post("/sessions", json=body)
    assert response.status_code == 200, response.text
    return response.json()


class TestSessions:
    def test_create_returns_initial_snapshot(self, client, benchmark_body):
        created = create(client, benchmark_body)
        snapshot = created["snapshot"]
        assert len(snapshot["robots"]) == 5
        assert snapshot["clock"] == 0
        assert snapshot["grid"]["width"] == 10

    def test_malformed_body_names_problem(self, client, benchmark_body):
        benchmark_body["grid"]["stations"]["a"] = [42, 1]
        response = client.post("/sessions", json=benchmark_body)
        assert response.status_code == 422
        assert "station" in response.json()["detail"]

    def test_sessions_are_isolated(self, client, benchmark_body):
        first = create(client, benchmark_body)["session"]
        second = create(client, benchmark_body)["session"]
        assert first != second
        client.post(f"/sessions/{first}/advance", json={"ticks": 2})
        snap_second = client.get(f"/sessions/{second}/snapshot").json()
        assert snap_second["clock"] == 0

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/nope/snapshot").status_code == 404
        assert client.post("/sessions/nope/advance", json={}).status_code == 404

    def test_session_limit(self, benchmark_body):
        with TestClient(create_app(max_sessions=1)) as limited:
            create(limited, benchmark_body)
            response = limited.post("/sessions", json=benchmark_body)
            assert response.status_code == 429


class TestAdvance:
    def test_single_tick(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        snapshot = client.post(f"/sessions/{sid}/advance", json={"ticks": 1}).json()
        assert snapshot["clock"] == 1

    def test_long_advance_stops_at_request(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        snapshot = client.post(f"/sessions/{sid}/advance", json={"ticks": 1000}).json()
        assert snapshot["pending"] is not None
        clock = snapshot["clock"]
        again = client.post(f"/sessions/{sid}/advance", json={"ticks": 5}).json()
        assert again["clock"] == clock  # time never advances past a request

    def test_advance_on_finished_session(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        while True:
            snapshot = client.post(f"/sessions/{sid}/advance", json={"ticks": 500}).json()
            if snapshot["finished"]:
                break
            client.post(f"/sessions/{sid}/decision", json={"allow": True})
        clock = snapshot["clock"]
        after = client.post(f"/sessions/{sid}/advance", json={"ticks": 7}).json()
        assert after["finished"] and after["clock"] == clock


class TestDecision:
    def advance_to_request(self, client, sid):
        snapshot = client.post(f"/sessions/{sid}/advance", json={"ticks": 1000}).json()
        assert snapshot["pending"] is not None
        return snapshot

    def test_allow_applies_proposal(self, client, demo_body):
        sid = create(client, demo_body)["session"]
        snapshot = self.advance_to_request(client, sid)
        pending = snapshot["pending"]
        assert pending["symbol"] == "e"
        after = client.post(f"/sessions/{sid}/decision", json={"allow": True}).json()
        projections = after["allocation"]["projections"]
        owners = {
            sym: rid
            for rid, proj in projections.items()
            for _, sym, _ in proj
        }
        assert owners["c"] == "r5"
        assert owners["f"] == "r2"

    def test_deny_keeps_allocation(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        before = self.advance_to_request(client, sid)["allocation"]["projections"]
        after = client.post(f"/sessions/{sid}/decision", json={"allow": False}).json()
        assert after["allocation"]["projections"] == before

    def test_double_post_conflicts(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        self.advance_to_request(client, sid)
        assert client.post(f"/sessions/{sid}/decision", json={"allow": True}).status_code == 200
        assert client.post(f"/sessions/{sid}/decision", json={"allow": True}).status_code == 409

    def test_pending_endpoint(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        assert client.get(f"/sessions/{sid}/pending").json()["pending"] is None
        self.advance_to_request(client, sid)
        pending = client.get(f"/sessions/{sid}/pending").json()["pending"]
        assert pending["proposed"]["steps"]


class TestEvents:
    def read_stream(self, client, sid, params):
        events = []
        with client.stream("GET", f"/sessions/{sid}/events", params=params) as response:
            buffer = ""
            for chunk in response.iter_text():
                buffer += chunk
            for block in buffer.split("\n\n"):
                if not block.strip():
                    continue
                entry = {}
                for line in block.splitlines():
                    key, _, value = line.partition(": ")
                    entry[key] = value
                events.append(entry)
        return events

    def test_backlog_in_order_no_gaps(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        client.post(f"/sessions/{sid}/advance", json={"ticks": 5})
        events = self.read_stream(client, sid, {"follow": "false"})
        ids = [int(e["id"]) for e in events]
        assert ids == list(range(len(ids)))
        count = client.get(f"/sessions/{sid}/snapshot").json()["event_count"]
        assert len(ids) == count

    def test_two_subscribers_identical(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        client.post(f"/sessions/{sid}/advance", json={"ticks": 3})
        first = self.read_stream(client, sid, {"follow": "false"})
        second = self.read_stream(client, sid, {"follow": "false"})
        assert first == second

    def test_resume_from_index_without_duplicates(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        client.post(f"/sessions/{sid}/advance", json={"ticks": 2})
        head = self.read_stream(client, sid, {"follow": "false"})
        client.post(f"/sessions/{sid}/advance", json={"ticks": 2})
        tail = self.read_stream(
            client, sid, {"follow": "false", "from": str(len(head))}
        )
        whole = self.read_stream(client, sid, {"follow": "false"})
        assert [e["id"] for e in head] + [e["id"] for e in tail] == [
            e["id"] for e in whole
        ]


class TestSnapshotConsistency:
    def test_snapshot_is_function_of_log_prefix(self, client, benchmark_body):
        sid_a = create(client, benchmark_body)["session"]
        sid_b = create(client, benchmark_body)["session"]
        for _ in range(4):
            snap_a = client.post(f"/sessions/{sid_a}/advance", json={"ticks": 1}).json()
            snap_b = client.post(f"/sessions/{sid_b}/advance", json={"ticks": 1}).json()
            assert snap_a == snap_b

    def test_reveal_flag_separates_ground_truth(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        hidden = client.get(f"/sessions/{sid}/snapshot").json()
        shown = client.get(f"/sessions/{sid}/snapshot", params={"reveal": "true"}).json()
        assert "obstacles" not in hidden["grid"]
        assert len(shown["grid"]["obstacles"]) == 10

    def test_bins_on_demand(self, client, benchmark_body):
        sid = create(client, benchmark_body)["session"]
        plain = client.get(f"/sessions/{sid}/snapshot").json()
        detailed = client.get(f"/sessions/{sid}/snapshot", params={"bins": "true"}).json()
        assert "bins" not in plain["beliefs"]["r1"]
        assert len(detailed["beliefs"]["r1"]["bins"]) == 101


def test_persistence_appends_jsonl(tmp_path, benchmark_body):
    with TestClient(create_app(persist_dir=str(tmp_path))) as client:
        sid = create(client, benchmark_body)["session"]
        client.post(f"/sessions/{sid}/advance", json={"ticks": 3})
        stored = (tmp_path / f"{sid}.jsonl").read_text().splitlines()
        count = client.get(f"/sessions/{sid}/snapshot").json()["event_count"]
        assert len(stored) == count
        assert json.loads(stored[0])["type"] == "start"
