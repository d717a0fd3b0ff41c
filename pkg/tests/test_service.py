import base64
import warnings

import numpy as np
import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore", UserWarning)
    from starlette.testclient import TestClient

from hdqkd.grids import Grid
from hdqkd.modes import crosstalk_matrix
from hdqkd.protocol import ChannelModel, ProtocolConfig, run_protocol
from hdqkd.service import create_app

SMALL = {"grid_n": 64, "grid_extent": 3.0, "waist": 1.0}
SOURCE_SMALL = {"n_pulses_lifetime": 200_000, "n_pulses_g2": 200_000, "seed": 5}


@pytest.fixture(scope="module")
def client():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return TestClient(create_app())


def test_health_and_version(client):
    assert client.get("/health").json() == {"status": "ok"}
    doc = client.get("/version").json()
    assert doc["tool"] == "hdqkd"


def test_crosstalk_matches_direct_call(client):
    reply = client.post("/crosstalk", json={**SMALL, "encoding": "phase_only"})
    assert reply.status_code == 200
    doc = reply.json()
    direct = crosstalk_matrix(Grid(64, 3.0), 1.0, encoding="phase_only")
    np.testing.assert_array_equal(np.array(doc["values"]), direct.values)
    assert doc["labels"] == list(direct.labels)
    assert doc["smf_waist"] == 1.0


def test_crosstalk_validation(client):
    reply = client.post("/crosstalk", json={**SMALL, "grid_n": 65})
    assert reply.status_code == 422  # pydantic: odd grid
    reply = client.post("/crosstalk", json={**SMALL, "grid_extent": 2.0})
    assert reply.status_code == 400  # core: window below three waists


def test_farfield_image_endpoint(client):
    reply = client.post("/farfield-image", json={
        **SMALL, "alice": "a", "bob": "b", "npix": 65,
    })
    assert reply.status_code == 200
    doc = reply.json()
    blob = base64.b64decode(doc["pgm_base64"])
    assert blob.startswith(b"P5\n65 65\n65535\n")
    assert 0.0 <= doc["on_axis_fraction"] <= 1.0
    bad = client.post("/farfield-image", json={
        **SMALL, "alice": "a", "bob": "delta",
    })
    assert bad.status_code == 400


def test_g2_endpoint(client):
    reply = client.post("/g2", json={**SOURCE_SMALL, "gate_list_ns": [0.0, 11.0]})
    assert reply.status_code == 200
    doc = reply.json()
    assert doc["fit"]["tau_fast_ns"] == pytest.approx(4.0, rel=0.2)
    assert doc["fit"]["tau_slow_ns"] == pytest.approx(25.0, rel=0.1)
    gates = [e["gate_ns"] for e in doc["estimates"]]
    assert gates == [0.0, 11.0]
    assert doc["estimates"][1]["g2_zero"] < doc["estimates"][0]["g2_zero"]
    assert len(doc["estimates"][0]["histogram_counts"]) > 0


def test_events_endpoint(client):
    reply = client.post("/events", json={"n_pulses": 200, "seed": 1})
    assert reply.status_code == 200
    lines = reply.text.splitlines()
    assert lines[0] == "pulse_index,t_offset_ns,origin"
    assert len(lines) > 100


def test_calibrate_endpoint(client):
    reply = client.post("/calibrate", json={
        "target_g2": 0.1, "gate_ns": 11.0, "n_pulses": 100_000, "seed": 2,
    })
    assert reply.status_code == 200
    q = reply.json()["biexciton_prob"]
    assert 0.2 < q < 0.6
    out_of_range = client.post("/calibrate", json={
        "target_g2": 0.9, "gate_ns": 11.0, "n_pulses": 50_000, "seed": 2,
    })
    assert out_of_range.status_code == 400


def test_sweep_endpoint(client):
    reply = client.post("/keyrate-sweep", json={"n_points": 11, "e_max": 0.2})
    doc = reply.json()
    assert doc["errors"][0] == 0.0 and doc["errors"][-1] == pytest.approx(0.2)
    assert doc["rates_by_dim"]["3"][0] == pytest.approx(np.log2(3), abs=1e-12)
    assert doc["thresholds"]["2"] == pytest.approx(0.110, abs=1e-3)
    assert doc["thresholds"]["3"] == pytest.approx(0.1595, abs=1e-3)


def test_protocol_run_with_inline_projection(client):
    exact = ChannelModel.exact()
    reply = client.post("/protocol-run", json={
        "n_rounds": 20_000,
        "seed": 9,
        "disclosure_fraction": 0.1,
        "channel": {"projection": exact.projection.tolist()},
    })
    assert reply.status_code == 200
    report = reply.json()["report"]
    _, _, _, direct = run_protocol(
        ProtocolConfig(n_rounds=20_000, disclosure_fraction=0.1), exact, seed=9
    )
    assert report["rate"] == direct.rate
    assert report["secret_bits"] == direct.secret_bits
    assert report["e_b1"] == direct.e_b1


def test_protocol_run_transcripts(client):
    exact = ChannelModel.exact()
    reply = client.post("/protocol-run", json={
        "n_rounds": 3_000,
        "seed": 10,
        "disclosure_fraction": 0.2,
        "channel": {"projection": exact.projection.tolist()},
        "include_transcripts": True,
    })
    doc = reply.json()
    t = doc["transcripts"]
    assert len(t["alice_basis"]) == 3_000
    assert set(t["bob_outcome"]) <= {-1, 0, 1, 2}


def test_protocol_run_validation(client):
    reply = client.post("/protocol-run", json={
        "n_rounds": 1_000,
        "channel": {"projection": [[1.0] * 6] * 6},
    })
    assert reply.status_code == 400  # block columns must sum to one
