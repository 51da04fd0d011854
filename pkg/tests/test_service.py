import time

import pytest
from fastapi.testclient import TestClient

from uqengine.service import create_app


def service_config(tmp_path, with_dataset=None):
    lines = [
        "seed = 5",
        "checkpoint = 0",
        "sampler.method = EMCEE",
        "sampler.chains = 8",
        "sampler.samples = 40",
        "likelihood.method = PF",
        "likelihood.particles = 4",
        "model.method = Randomwalk",
        "prior.mu = uniform -1 1",
        "prior.sigma = uniform 5 15",
        "prior.epsilon = lognormal 1 1",
        "initial.position = normal 10 2",
        "initial.time = delta 0",
        "error.method = normal",
        "error.scale = epsilon",
        "synthesize.snapshots = 1 2 3",
        "exact.mu = 0.3",
        "exact.sigma = 7",
        "exact.epsilon = 2",
    ]
    if with_dataset:
        lines.append(f"dataset.file = {with_dataset}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def client(tmp_path):
    app = create_app(workdir=tmp_path / "service")
    with TestClient(app) as client:
        yield client


def wait_for(client, run_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/runs/{run_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise TimeoutError(f"run {run_id} did not finish")


class TestHealth:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["version"]


class TestSynthesizeEndpoint:
    def test_returns_loader_compatible_files(self, client, tmp_path):
        response = client.post(
            "/synthesize", json={"config": service_config(tmp_path)}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["parameters"] == {"mu": 0.3, "sigma": 7.0, "epsilon": 2.0}
        assert body["predictions"].splitlines()[0].split() == ["time", "position"]
        assert body["dataset"] is not None

    def test_bad_config_rejected(self, client):
        response = client.post("/synthesize", json={"config": "nonsense = 1"})
        assert response.status_code == 400


class TestModelTestEndpoint:
    def test_randomwalk_passes(self, client, tmp_path):
        response = client.post(
            "/models/test", json={"config": service_config(tmp_path)}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["passed"] is True
        assert set(body["checks"]) == {"clone", "move", "reseed"}


class TestRunLifecycle:
    def test_submit_poll_fetch(self, client, tmp_path):
        # synthesize a dataset through the service, then infer on it
        synth = client.post("/synthesize", json={"config": service_config(tmp_path)})
        dataset_path = tmp_path / "dataset.dat"
        dataset_path.write_text(synth.json()["dataset"])

        created = client.post(
            "/runs",
            json={"config": service_config(tmp_path, with_dataset=dataset_path)},
        )
        assert created.status_code == 201
        run_id = created.json()["id"]

        listing = client.get("/runs").json()
        assert any(run["id"] == run_id for run in listing["runs"])

        status = wait_for(client, run_id)
        assert status["state"] == "done", status.get("error")
        assert status["summary"]["batches"] == 5

        parameters = client.get(f"/runs/{run_id}/parameters")
        assert parameters.status_code == 200
        body = parameters.json()
        assert set(body["labels"]) == {"mu", "sigma", "epsilon"}
        assert len(body["rows"]) == 6 * 8  # batches 0..5, 8 chains

        report = client.get(f"/runs/{run_id}/report")
        assert report.status_code == 200
        assert report.json()["batches"] == 5

    def test_results_unavailable_while_running(self, client, tmp_path):
        synth = client.post("/synthesize", json={"config": service_config(tmp_path)})
        dataset_path = tmp_path / "dataset.dat"
        dataset_path.write_text(synth.json()["dataset"])
        created = client.post(
            "/runs",
            json={"config": service_config(tmp_path, with_dataset=dataset_path)},
        )
        run_id = created.json()["id"]
        response = client.get(f"/runs/{run_id}/parameters")
        assert response.status_code in (200, 409)  # done already or still running
        wait_for(client, run_id)

    def test_unknown_run_404(self, client):
        assert client.get("/runs/deadbeef").status_code == 404

    def test_bad_config_rejected_on_submit(self, client):
        response = client.post("/runs", json={"config": "sampler.method = EMCEE"})
        assert response.status_code == 400

    def test_failed_run_reports_error(self, client, tmp_path):
        # a valid configuration whose dataset file does not exist
        config = service_config(tmp_path, with_dataset=tmp_path / "missing.dat")
        created = client.post("/runs", json={"config": config})
        status = wait_for(client, created.json()["id"])
        assert status["state"] == "failed"
        assert status["error"]

    def test_delete_finished_run(self, client, tmp_path):
        synth = client.post("/synthesize", json={"config": service_config(tmp_path)})
        dataset_path = tmp_path / "dataset.dat"
        dataset_path.write_text(synth.json()["dataset"])
        created = client.post(
            "/runs",
            json={"config": service_config(tmp_path, with_dataset=dataset_path)},
        )
        run_id = created.json()["id"]
        wait_for(client, run_id)
        assert client.delete(f"/runs/{run_id}").status_code == 204
        assert client.get(f"/runs/{run_id}").status_code == 404
