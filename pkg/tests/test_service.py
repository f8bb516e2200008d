import io
import json
import time

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image as PILImage

from e2eve import artist, sampler, vq
from e2eve.imageops import encode_mask_png, encode_png
from e2eve.service import EditingService, create_app


def _png(pixels) -> bytes:
    return encode_png(pixels)


def _mask_png(mask) -> bytes:
    return encode_mask_png(mask)


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("svc_ckpt")
    cfg = vq.CodebookConfig(codebook_size=64, code_dim=16, downsample_factor=8, hidden_channels=16)
    vq_img = vq.build_vq_model(cfg, seed=0)
    vq_drv = vq.build_vq_model(cfg, seed=1)
    vq.save_vq(tmp / "vq_image.pt", vq_img)
    vq.save_vq(tmp / "vq_driver.pt", vq_drv)
    layout = artist.SequenceLayout(
        source_shape=(4, 4), driver_shape=(2, 2), vocab_image=64, vocab_driver=64
    )
    model = artist.build_artist_model(
        artist.ArtistConfig(layout=layout, n_layers=2, n_heads=2, embed_dim=64, driver_dropout=0.05),
        seed=2,
    )
    gen = torch.Generator().manual_seed(3)
    with torch.no_grad():
        model.head.weight.copy_(torch.randn(model.head.weight.shape, generator=gen) * 0.3)
    artist.save_artist(tmp / "artist.pt", model, tmp / "vq_image.pt", tmp / "vq_driver.pt")
    return sampler.load_bundle(tmp / "artist.pt", tmp / "vq_image.pt", tmp / "vq_driver.pt")


@pytest.fixture()
def client(bundle, tmp_path):
    service = EditingService(bundle, tmp_path / "samples", max_jobs=2)
    return TestClient(create_app(service))


def _poll(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    seen = []
    while time.time() < deadline:
        job = client.get(f"/v1/jobs/{job_id}").json()
        seen.append(job["status"])
        if job["status"] in ("done", "failed"):
            return job, seen
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} stuck; statuses {seen[-5:]}")


def _complete_session(client, seed=0, source_pixels=None):
    rng = np.random.default_rng(17)
    sid = client.post("/v1/sessions").json()["id"]
    source = source_pixels if source_pixels is not None else rng.random((3, 32, 32), dtype=np.float32)
    assert client.put(f"/v1/sessions/{sid}/source", content=_png(source)).status_code == 200
    mask = np.zeros((32, 32), dtype=np.uint8)
    mask[8:24, 8:24] = 1
    r = client.put(
        f"/v1/sessions/{sid}/region", content=_mask_png(mask),
        headers={"content-type": "image/png"},
    )
    assert r.status_code == 200
    driver = rng.random((3, 16, 16), dtype=np.float32)
    assert client.put(f"/v1/sessions/{sid}/driver", content=_png(driver)).status_code == 200
    return sid


def test_health(client):
    body = client.get("/v1/health").json()
    assert body["status"] == "ok"
    assert body["model_loaded"] is True
    assert body["image_size"] == [32, 32]
    assert body["driver_size"] == [16, 16]


def test_full_session_flow_greedy(client):
    sid = _complete_session(client)
    r = client.post(
        f"/v1/sessions/{sid}/generate",
        json={"n": 4, "keep": 2, "policy": {"kind": "greedy"}, "seed": 0},
    )
    assert r.status_code == 202
    job, statuses = _poll(client, r.json()["id"])
    assert job["status"] == "done"
    assert len(job["results"]) == 4
    kept = [res for res in job["results"] if res["kept"]]
    assert len(kept) == 2
    # greedy: all candidates identical, so content-addressing collapses the ids
    ids = {res["sample_id"] for res in job["results"]}
    assert len(ids) == 1
    png = client.get(f"/v1/samples/{kept[0]['sample_id']}")
    assert png.status_code == 200
    assert png.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_region_as_json_rect(client):
    sid = _complete_session(client)
    r = client.put(
        f"/v1/sessions/{sid}/region",
        content=json.dumps({"top": 4, "left": 4, "height": 8, "width": 8}),
        headers={"content-type": "application/json"},
    )
    assert r.status_code == 200
    assert r.json()["bbox"] == [4, 4, 8, 8]


def test_mask_upload_roundtrip_pixel_identical(client):
    sid = client.post("/v1/sessions").json()["id"]
    rng = np.random.default_rng(5)
    mask = (rng.random((32, 32)) > 0.5).astype(np.uint8)
    mask[0, 0] = 1
    client.put(f"/v1/sessions/{sid}/region", content=_mask_png(mask),
               headers={"content-type": "image/png"})
    fetched = client.get(f"/v1/sessions/{sid}/region")
    arr = np.asarray(PILImage.open(io.BytesIO(fetched.content)).convert("L"))
    assert np.array_equal((arr > 0).astype(np.uint8), mask)


def test_incomplete_session_409(client):
    sid = client.post("/v1/sessions").json()["id"]
    r = client.post(f"/v1/sessions/{sid}/generate", json={"n": 1, "keep": 1, "seed": 0})
    assert r.status_code == 409
    assert "missing" in r.json()["detail"]


def test_unknown_ids_404(client):
    assert client.get("/v1/jobs/nope").status_code == 404
    assert client.get("/v1/samples/nope").status_code == 404
    assert client.put("/v1/sessions/nope/source", content=b"x").status_code == 404
    assert client.post("/v1/sessions/nope/generate", json={}).status_code == 404


def test_malformed_inputs_422(client):
    sid = client.post("/v1/sessions").json()["id"]
    assert client.put(f"/v1/sessions/{sid}/source", content=b"junk").status_code == 422
    # wrong-size mask
    bad_mask = np.ones((16, 16), dtype=np.uint8)
    r = client.put(f"/v1/sessions/{sid}/region", content=_mask_png(bad_mask),
                   headers={"content-type": "image/png"})
    assert r.status_code == 422
    # empty mask
    r = client.put(f"/v1/sessions/{sid}/region",
                   content=_mask_png(np.zeros((32, 32), dtype=np.uint8)),
                   headers={"content-type": "image/png"})
    assert r.status_code == 422
    # zero-area rect
    r = client.put(f"/v1/sessions/{sid}/region",
                   content=json.dumps({"top": 0, "left": 0, "height": 0, "width": 4}),
                   headers={"content-type": "application/json"})
    assert r.status_code == 422
    # malformed generate body
    sid2 = _complete_session(client)
    r = client.post(f"/v1/sessions/{sid2}/generate", json={"n": 2, "keep": 5})
    assert r.status_code == 422


def test_no_model_503(tmp_path):
    service = EditingService(None, tmp_path / "s", max_jobs=1)
    client = TestClient(create_app(service))
    assert client.get("/v1/health").json()["model_loaded"] is False
    sid = _complete_session(client)
    r = client.post(f"/v1/sessions/{sid}/generate", json={"n": 1, "keep": 1, "seed": 0})
    assert r.status_code == 503


def test_deterministic_across_sessions(client):
    rng = np.random.default_rng(23)
    source = rng.random((3, 32, 32), dtype=np.float32)
    ids = []
    for _ in range(2):
        sid = _complete_session(client, source_pixels=source)
        r = client.post(
            f"/v1/sessions/{sid}/generate",
            json={"n": 2, "keep": 2, "policy": {"kind": "top_p", "p": 0.9}, "seed": 42},
        )
        job, _ = _poll(client, r.json()["id"])
        assert job["status"] == "done"
        ids.append(tuple(sorted(res["sample_id"] for res in job["results"])))
    assert ids[0] == ids[1]  # byte-identical PNGs -> identical content addresses
    bytes_a = client.get(f"/v1/samples/{ids[0][0]}").content
    bytes_b = client.get(f"/v1/samples/{ids[1][0]}").content
    assert bytes_a == bytes_b


def test_promote_sets_source_to_sample(client):
    sid = _complete_session(client)
    r = client.post(f"/v1/sessions/{sid}/generate",
                    json={"n": 1, "keep": 1, "policy": {"kind": "greedy"}, "seed": 1})
    job, _ = _poll(client, r.json()["id"])
    sample_id = job["results"][0]["sample_id"]
    pr = client.post(f"/v1/sessions/{sid}/promote", json={"sample_id": sample_id})
    assert pr.status_code == 200
    assert pr.json()["source_sha256"] == sample_id  # content address is the sha
    # a new region + driver then a second job: its source hash equals the promoted sample
    r2 = client.put(
        f"/v1/sessions/{sid}/region",
        content=json.dumps({"top": 0, "left": 0, "height": 8, "width": 8}),
        headers={"content-type": "application/json"},
    )
    assert r2.status_code == 200
    g2 = client.post(f"/v1/sessions/{sid}/generate",
                     json={"n": 1, "keep": 1, "policy": {"kind": "greedy"}, "seed": 2})
    job2, _ = _poll(client, g2.json()["id"])
    assert job2["source_sha256"] == sample_id


def test_promote_unknown_sample_404(client):
    sid = _complete_session(client)
    assert client.post(f"/v1/sessions/{sid}/promote", json={"sample_id": "bogus"}).status_code == 404


def test_driver_from_sample_crop(client):
    sid = _complete_session(client)
    r = client.post(f"/v1/sessions/{sid}/generate",
                    json={"n": 1, "keep": 1, "policy": {"kind": "greedy"}, "seed": 3})
    job, _ = _poll(client, r.json()["id"])
    sample_id = job["results"][0]["sample_id"]
    r = client.put(
        f"/v1/sessions/{sid}/driver",
        content=json.dumps({"sample_id": sample_id, "rect": [0, 0, 16, 16]}),
        headers={"content-type": "application/json"},
    )
    assert r.status_code == 200
    assert r.json()["size"] == [16, 16]


def test_jobs_queue_and_finish_with_one_worker(bundle, tmp_path):
    service = EditingService(bundle, tmp_path / "s2", max_jobs=1)
    client = TestClient(create_app(service))
    sids = [_complete_session(client) for _ in range(3)]
    job_ids = []
    for i, sid in enumerate(sids):
        r = client.post(f"/v1/sessions/{sid}/generate",
                        json={"n": 1, "keep": 1, "policy": {"kind": "greedy"}, "seed": i})
        job_ids.append(r.json()["id"])
    # polling is idempotent and statuses move monotonically to done
    order = {"queued": 0, "running": 1, "done": 2, "failed": 2}
    last = {j: -1 for j in job_ids}
    deadline = time.time() + 120
    while time.time() < deadline:
        states = {j: client.get(f"/v1/jobs/{j}").json()["status"] for j in job_ids}
        for j, s in states.items():
            assert order[s] >= last[j]
            last[j] = order[s]
        if all(s == "done" for s in states.values()):
            break
        time.sleep(0.05)
    assert all(client.get(f"/v1/jobs/{j}").json()["status"] == "done" for j in job_ids)
