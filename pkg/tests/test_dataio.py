import hashlib
import warnings
from pathlib import Path

import numpy as np
import pytest
from PIL import Image as PILImage

from e2eve import dataio
from e2eve.errors import EmptyMask, MaskShapeMismatch, NoImages
from e2eve.imageops import save_mask

GOLDEN_TOY_MEAN = 0.5963940916  # mean pixel of make_toy_corpus(16, 64x64, seed=123)


def _write_images(folder: Path, n: int, size=(20, 20)):
    folder.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    for i in range(n):
        arr = rng.integers(0, 256, (*size, 3)).astype(np.uint8)
        PILImage.fromarray(arr).save(folder / f"img_{i:03d}.png")


def test_ingest_split_counts(tmp_path):
    _write_images(tmp_path / "src", 10)
    m = dataio.ingest_folder(tmp_path / "src", (16, 16), val_fraction=0.2, seed=0)
    assert len(m.split_entries("train")) == 8
    assert len(m.split_entries("val")) == 2


def test_ingest_deterministic(tmp_path):
    _write_images(tmp_path / "src", 7)
    a = dataio.ingest_folder(tmp_path / "src", (16, 16), val_fraction=0.3, seed=5)
    b = dataio.ingest_folder(tmp_path / "src", (16, 16), val_fraction=0.3, seed=5)
    assert a.to_json() == b.to_json()


def test_ingest_floor_rule_single_image(tmp_path):
    _write_images(tmp_path / "src", 1)
    m = dataio.ingest_folder(tmp_path / "src", (16, 16), val_fraction=0.5, seed=0)
    assert len(m.split_entries("train")) == 1
    assert len(m.split_entries("val")) == 0


def test_ingest_skips_undecodable(tmp_path):
    _write_images(tmp_path / "src", 3)
    (tmp_path / "src" / "broken.png").write_bytes(b"not a png at all")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = dataio.ingest_folder(tmp_path / "src", (16, 16), val_fraction=0.0, seed=0)
    assert len(m.entries) == 3
    assert m.metadata["skipped"] == 1


def test_ingest_empty_dir_raises(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(NoImages):
        dataio.ingest_folder(tmp_path / "empty", (16, 16))


def test_manifest_roundtrip(tmp_path):
    _write_images(tmp_path / "src", 4)
    m = dataio.ingest_folder(tmp_path / "src", (16, 16), val_fraction=0.25, seed=1)
    path = m.save()
    loaded = dataio.load_manifest(path)
    assert loaded.to_json() == m.to_json()
    assert loaded.root == m.root


def test_manifest_images_load_at_declared_size(tmp_path):
    _write_images(tmp_path / "src", 3, size=(30, 44))
    m = dataio.ingest_folder(tmp_path / "src", (16, 24), val_fraction=0.0, seed=0)
    for e in m.entries:
        img = m.load(e)
        assert img.size == (16, 24)
        assert img.pixels.min() >= 0.0 and img.pixels.max() <= 1.0


def _dir_digest(folder: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(folder.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(folder).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_toy_corpus_deterministic(tmp_path):
    dataio.make_toy_corpus(4, (32, 32), seed=7, out=tmp_path / "a")
    dataio.make_toy_corpus(4, (32, 32), seed=7, out=tmp_path / "b")
    assert _dir_digest(tmp_path / "a") == _dir_digest(tmp_path / "b")


def test_toy_corpus_masks_valid(tmp_path):
    m = dataio.make_toy_corpus(6, (48, 48), seed=3, out=tmp_path / "c")
    for e in m.entries:
        region = m.load_mask(e)
        assert region.area > 0
        assert region.mask.shape == (48, 48)


def test_toy_corpus_golden_mean(tmp_path):
    m = dataio.make_toy_corpus(16, (64, 64), seed=123, out=tmp_path / "g")
    mean = float(np.mean(np.stack([m.load(e).pixels for e in m.entries]), dtype=np.float64))
    assert mean == pytest.approx(GOLDEN_TOY_MEAN, abs=1e-6)


def test_load_mask_empty_raises(tmp_path):
    save_mask(np.zeros((8, 8), dtype=np.uint8), tmp_path / "m.png")
    with pytest.raises(EmptyMask):
        dataio.load_mask(tmp_path / "m.png")


def test_load_mask_full_image(tmp_path):
    save_mask(np.ones((8, 10), dtype=np.uint8), tmp_path / "m.png")
    region = dataio.load_mask(tmp_path / "m.png")
    assert region.area == 80
    assert region.bbox == (0, 0, 8, 10)


def test_load_mask_checkerboard_count(tmp_path):
    yy, xx = np.mgrid[0:16, 0:16]
    checker = ((yy + xx) % 2 == 0).astype(np.uint8)
    save_mask(checker, tmp_path / "m.png")
    region = dataio.load_mask(tmp_path / "m.png")
    # brute-force count as the oracle
    assert region.area == sum(
        1 for y in range(16) for x in range(16) if (y + x) % 2 == 0
    )
    assert region.area == 16 * 16 // 2


def test_load_mask_shape_mismatch(tmp_path):
    save_mask(np.ones((8, 8), dtype=np.uint8), tmp_path / "m.png")
    with pytest.raises(MaskShapeMismatch):
        dataio.load_mask(tmp_path / "m.png", expected_size=(16, 16))


def test_mask_roundtrip_preserves_pattern(tmp_path):
    rng = np.random.default_rng(11)
    mask = (rng.random((24, 24)) > 0.6).astype(np.uint8)
    mask[0, 0] = 1  # never empty
    save_mask(mask, tmp_path / "m.png")
    region = dataio.load_mask(tmp_path / "m.png")
    assert np.array_equal(region.mask, mask)
