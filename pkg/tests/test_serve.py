"""HTTP serve surface: run lifecycle, event streaming, snapshots, controls."""

from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from editsearch.config import config_digest, derive_config
from editsearch.serialize import document_to_topology
from editsearch.serve import build_app

from conftest import make_task


@pytest.fixture
def client():
    with TestClient(build_app()) as c:
        yield c


def start_run(client, complexity=2, seed=5, preset="main", **extra) -> str:
    body = {
        "task": make_task(complexity, seed).to_doc(),
        "preset": preset,
        "seed": seed,
        "p": extra.pop("p", 0.9),
        "q": extra.pop("q", 0.05),
    }
    body.update(extra)
    response = client.post("/runs", json=body)
    assert response.status_code == 200, response.text
    return response.json()["run_id"]


def wait_finished(client, run_id, timeout=15.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        rows = {row["run_id"]: row for row in client.get("/runs").json()}
        row = rows[run_id]
        if row["finished"]:
            return row
        time.sleep(0.01)
    raise AssertionError(f"run {run_id} did not finish within {timeout}s")


def event_lines(client, run_id, offset=0) -> list[dict]:
    response = client.get(f"/runs/{run_id}/events", params={"offset": offset})
    assert response.status_code == 200
    return [json.loads(line) for line in response.text.splitlines() if line]


class TestRunLifecycle:
    def test_create_and_finish(self, client):
        run_id = start_run(client)
        row = wait_finished(client, run_id)
        assert row["error"] is None
        assert row["size"] >= 1

    def test_bad_task_rejected(self, client):
        response = client.post("/runs", json={"task": {"nope": 1}})
        assert response.status_code == 400

    def test_bad_preset_rejected(self, client):
        body = {"task": make_task(2, 1).to_doc(), "preset": "sideways"}
        assert client.post("/runs", json=body).status_code == 400

    def test_overrides_applied(self, client):
        run_id = start_run(client, preset="resampling_only", overrides={"max_steps": 2})
        wait_finished(client, run_id)
        doc = client.get(f"/runs/{run_id}/topology").json()
        topology, _ = document_to_topology(doc)
        assert topology.size <= 2

    def test_unknown_run_is_404(self, client):
        assert client.get("/runs/nope/topology").status_code == 404
        assert client.get("/runs/nope/events").status_code == 404
        assert client.post("/runs/nope/control", json={"kind": "pause"}).status_code == 404


class TestEventStream:
    def test_full_stream_shape(self, client):
        run_id = start_run(client)
        wait_finished(client, run_id)
        events = event_lines(client, run_id)
        assert [e["seq"] for e in events] == list(range(len(events)))
        assert events[0]["kind"] == "run_started"
        assert events[-1]["kind"] == "run_finished"
        assert all(e["run_id"] == run_id for e in events)

    def test_offset_resume(self, client):
        run_id = start_run(client)
        wait_finished(client, run_id)
        full = event_lines(client, run_id)
        tail = event_lines(client, run_id, offset=3)
        assert tail == full[3:]
        assert event_lines(client, run_id, offset=len(full)) == []

    def test_negative_offset_rejected(self, client):
        run_id = start_run(client)
        wait_finished(client, run_id)
        response = client.get(f"/runs/{run_id}/events", params={"offset": -1})
        assert response.status_code == 400


class TestTopologySnapshot:
    def test_snapshot_parses_and_carries_digest(self, client):
        run_id = start_run(client, complexity=2, seed=9)
        wait_finished(client, run_id)
        doc = client.get(f"/runs/{run_id}/topology").json()
        topology, digest = document_to_topology(doc)
        assert topology.run_id == run_id
        assert digest == config_digest(derive_config(2, "main"))
        assert topology.size >= 1


class TestImages:
    def test_sim_image_served_by_content_id(self, client):
        run_id = start_run(client)
        wait_finished(client, run_id)
        doc = client.get(f"/runs/{run_id}/topology").json()
        topology, _ = document_to_topology(doc)
        root_input = topology.state(0).input
        response = client.get(f"/runs/{run_id}/images/{root_input.id}")
        assert response.status_code == 200
        assert response.text == root_input.locator
        payload = json.loads(response.text)
        assert "attributes" in payload

    def test_unknown_image_is_404(self, client):
        run_id = start_run(client)
        wait_finished(client, run_id)
        assert client.get(f"/runs/{run_id}/images/{'0' * 64}").status_code == 404


class TestControls:
    def test_unknown_kind_rejected(self, client):
        run_id = start_run(client)
        response = client.post(f"/runs/{run_id}/control", json={"kind": "explode"})
        assert response.status_code == 400

    def test_control_after_finish_conflicts(self, client):
        run_id = start_run(client)
        wait_finished(client, run_id)
        response = client.post(f"/runs/{run_id}/control", json={"kind": "pause"})
        assert response.status_code == 409

    def test_live_pause_accept_round_trip(self, client):
        # An unbounded failing run: p=0 children never pass the stay gate, so
        # the loop bounces off the root forever until controls end it. Size
        # comes from the list endpoint; snapshotting a hot run would race the
        # engine thread.
        run_id = start_run(
            client,
            complexity=1,
            preset="resampling_only",
            p=0.0,
            overrides={"max_steps": 1000000, "max_n_children": 1000000},
        )

        def row_for(run):
            return {r["run_id"]: r for r in client.get("/runs").json()}[run]

        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline and row_for(run_id)["size"] < 1:
            time.sleep(0.005)
        assert row_for(run_id)["size"] >= 1, "run never created a state"

        assert client.post(
            f"/runs/{run_id}/control", json={"kind": "pause"}
        ).json() == {"accepted": True}

        # Paused means the topology stops growing while the run stays alive.
        frozen = None
        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline:
            before = row_for(run_id)["size"]
            time.sleep(0.15)
            after = row_for(run_id)
            if after["size"] == before and not after["finished"]:
                frozen = before
                break
        assert frozen is not None, "pause never took effect"

        assert client.post(
            f"/runs/{run_id}/control", json={"kind": "accept", "state_id": 1}
        ).json() == {"accepted": True}
        row = wait_finished(client, run_id)
        assert row["error"] is None
        assert row["size"] == frozen

        events = event_lines(client, run_id)
        kinds = [e["kind"] for e in events]
        assert "paused" in kinds
        assert "accepted" in kinds
        applied = [e["payload"]["kind"] for e in events if e["kind"] == "control_applied"]
        assert applied == ["pause", "accept"]
        finish = events[-1]
        assert finish["kind"] == "run_finished"
        assert finish["payload"]["termination"] == "completed"
        assert finish["payload"]["final_states"] == [1]


class TestAuth:
    def test_token_enforced_everywhere(self):
        with TestClient(build_app(token="t0k")) as client:
            assert client.get("/runs").status_code == 401
            body = {"task": make_task(1, 1).to_doc()}
            assert client.post("/runs", json=body).status_code == 401
            wrong = {"Authorization": "Bearer nope"}
            assert client.get("/runs", headers=wrong).status_code == 401
            good = {"Authorization": "Bearer t0k"}
            assert client.get("/runs", headers=good).status_code == 200
            response = client.post("/runs", json=body, headers=good)
            assert response.status_code == 200
