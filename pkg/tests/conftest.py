"""Shared fixtures for the acceptance suite: one fully trained toy pipeline.

Training runs once per pytest session (about half an hour on a 2-core CPU box)
and is shared by the overfit, trend, and service acceptance tests. Set
E2EVE_ACCEPTANCE_CACHE to a directory to reuse checkpoints across sessions
while iterating locally.
"""
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # oracles.py

TOY_SEED = 100
VQ_IMAGE_STEPS = 1500
VQ_DRIVER_STEPS = 800
ARTIST_STEPS = 5000
QUADS_PER_IMAGE = 24


@dataclass
class ToyPipeline:
    manifest: object
    vq_image_path: Path
    vq_driver_path: Path
    artist_main_path: Path
    artist_paste_path: Path
    shards_main: Path
    shards_paste: Path

    def bundle(self, which: str = "main"):
        from e2eve.sampler import load_bundle

        artist_path = self.artist_main_path if which == "main" else self.artist_paste_path
        return load_bundle(artist_path, self.vq_image_path, self.vq_driver_path)


def _train_pipeline(root: Path) -> ToyPipeline:
    from e2eve import artist, dataio, editsynth, shards, vq
    from e2eve.editsynth import TransformConfig

    root.mkdir(parents=True, exist_ok=True)
    corpus = root / "corpus"
    if not (corpus / "manifest.json").exists():
        dataio.make_toy_corpus(40, (64, 64), seed=TOY_SEED, out=corpus, val_fraction=0.2)
    manifest = dataio.load_manifest(corpus / "manifest.json")

    tcfg_main = TransformConfig(0.4, 0.7, pos_aug=True, size_aug=True, driver_size=(16, 16))
    tcfg_paste = TransformConfig(1.0, 1.0, pos_aug=False, size_aug=False, driver_size=(16, 16))
    for name, tcfg in (("shards_main", tcfg_main), ("shards_paste", tcfg_paste)):
        if not (root / name / "index.json").exists():
            stream = editsynth.synthesize_dataset(manifest, tcfg, QUADS_PER_IMAGE, seed=7, split="train")
            shards.write_shards(stream, root / name, config={"alpha": [tcfg.alpha_min, tcfg.alpha_max]}, seed=7)

    vq_cfg = vq.CodebookConfig(codebook_size=256, code_dim=64, downsample_factor=8, hidden_channels=64)
    if not (root / "vq_image.pt").exists():
        model = vq.build_vq_model(vq_cfg, seed=201)
        vq.train_vq(
            model, manifest,
            vq.VqTrainConfig(lr=1e-3, batch_size=16, steps=VQ_IMAGE_STEPS, seed=201),
            role="image",
        )
        vq.save_vq(root / "vq_image.pt", model, step=VQ_IMAGE_STEPS)
    if not (root / "vq_driver.pt").exists():
        model = vq.build_vq_model(vq_cfg, seed=202)
        vq.train_vq(
            model, manifest,
            vq.VqTrainConfig(lr=1e-3, batch_size=16, steps=VQ_DRIVER_STEPS, seed=202),
            role="driver", transform_cfg=tcfg_main,
        )
        vq.save_vq(root / "vq_driver.pt", model, step=VQ_DRIVER_STEPS)

    vq_img = vq.load_vq(root / "vq_image.pt")
    vq_drv = vq.load_vq(root / "vq_driver.pt")
    layout = artist.SequenceLayout(
        source_shape=(8, 8), driver_shape=(2, 2), vocab_image=256, vocab_driver=256
    )
    for name, shard_dir, dropout, seed in (
        ("artist_main.pt", root / "shards_main", 0.05, 301),
        ("artist_paste.pt", root / "shards_paste", 0.0, 302),
    ):
        if (root / name).exists():
            continue
        data = artist.tokenize_quadruplets(iter(shards.open_shards(shard_dir)), vq_img, vq_drv)
        model = artist.build_artist_model(
            artist.ArtistConfig(layout=layout, n_layers=4, n_heads=4, embed_dim=128,
                                driver_dropout=dropout),
            seed=seed,
        )
        artist.train_artist(
            model, data,
            artist.ArtistTrainConfig(lr=3e-4, batch_size=16, steps=ARTIST_STEPS, seed=seed,
                                     warmup_steps=100),
        )
        artist.save_artist(root / name, model, root / "vq_image.pt", root / "vq_driver.pt",
                           step=ARTIST_STEPS)

    return ToyPipeline(
        manifest=manifest,
        vq_image_path=root / "vq_image.pt",
        vq_driver_path=root / "vq_driver.pt",
        artist_main_path=root / "artist_main.pt",
        artist_paste_path=root / "artist_paste.pt",
        shards_main=root / "shards_main",
        shards_paste=root / "shards_paste",
    )


@pytest.fixture(scope="session")
def toy_pipeline(tmp_path_factory) -> ToyPipeline:
    cache = os.environ.get("E2EVE_ACCEPTANCE_CACHE")
    root = Path(cache) if cache else tmp_path_factory.mktemp("toy_pipeline")
    return _train_pipeline(root)
