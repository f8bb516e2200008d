"""Command-line entry point binding all pipeline stages.

Subcommands: data (ingest | toy), synth, train-vq, train-artist, sample,
evaluate, serve, pipeline. A single --seed drives every stage through the
documented derivation in presets.derive_seed; the effective configuration is
echoed into each artifact (manifest metadata, shard index, checkpoint extra,
report).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import E2eveError
from .presets import derive_seed, get_preset, merge_config


def _add_preset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=["toy", "paper-scale"], default="toy")
    p.add_argument("--config", type=Path, default=None, help="JSON config file overriding the preset")
    p.add_argument("--dry-run", action="store_true", help="print the effective config and exit")


def _effective_config(args) -> dict:
    cfg = get_preset(args.preset)
    if getattr(args, "config", None):
        cfg = merge_config(cfg, json.loads(Path(args.config).read_text()))
    return cfg


def _print_config(cfg: dict, seed: int) -> None:
    art, smp, syn = cfg["artist"], cfg["sampler"], cfg["synth"]
    print(
        f"transformer: {art['n_layers']} layers / {art['n_heads']} heads / "
        f"{art['embed_dim']} dim"
    )
    print(f"sampling: {smp['policy']} p={smp['p']} ({smp['n_candidates']} -> {smp['n_keep']})")
    print(f"alpha: {syn['alpha_min']}-{syn['alpha_max']} pos_aug={syn['pos_aug']} size_aug={syn['size_aug']}")
    print(f"seed: {seed}")
    print(json.dumps(cfg, indent=2, sort_keys=True))


def _transform_config(syn: dict):
    from .editsynth import TransformConfig

    return TransformConfig(
        alpha_min=syn["alpha_min"],
        alpha_max=syn["alpha_max"],
        pos_aug=syn["pos_aug"],
        size_aug=syn["size_aug"],
        driver_size=tuple(syn["driver_size"]),
    )


def cmd_data(args) -> int:
    from . import dataio

    if args.data_cmd == "ingest":
        manifest = dataio.ingest_folder(
            args.src, tuple(args.size), val_fraction=args.val, seed=args.seed
        )
        path = manifest.save()
        print(f"wrote {path} ({len(manifest.entries)} images, {manifest.metadata['skipped']} skipped)")
    else:
        manifest = dataio.make_toy_corpus(
            args.n, tuple(args.size), seed=args.seed, out=args.out, val_fraction=args.val
        )
        print(f"wrote {len(manifest.entries)} toy images under {manifest.root}")
    return 0


def cmd_synth(args) -> int:
    from . import dataio, editsynth, shards

    cfg = _effective_config(args)
    syn = cfg["synth"]
    if args.alpha:
        syn["alpha_min"], syn["alpha_max"] = args.alpha
    if args.pos_aug is not None:
        syn["pos_aug"] = args.pos_aug
    if args.size_aug is not None:
        syn["size_aug"] = args.size_aug
    if args.per_image:
        syn["per_image"] = args.per_image
    if args.driver_size:
        syn["driver_size"] = args.driver_size
    if not syn["size_aug"] and syn["alpha_min"] != syn["alpha_max"]:
        syn["alpha_max"] = syn["alpha_min"]
    if args.dry_run:
        _print_config(cfg, args.seed)
        return 0
    manifest = dataio.load_manifest(args.manifest)
    tcfg = _transform_config(syn)
    region_cfg = editsynth.BlockRegionConfig(
        area_range=tuple(syn["area_range"]), aspect_range=tuple(syn["aspect_range"])
    )
    seed = derive_seed(args.seed, f"synth/{args.split}")
    stream = editsynth.synthesize_dataset(
        manifest,
        tcfg,
        quadruplets_per_image=syn["per_image"],
        seed=seed,
        split=args.split,
        freeform=args.freeform,
        region_cfg=region_cfg,
    )
    index = shards.write_shards(stream, args.out, config={"synth": syn, "seed": args.seed}, seed=seed)
    n = json.loads(index.read_text())["n_records"]
    print(f"wrote {n} records to {index.parent}")
    return 0


def cmd_train_vq(args) -> int:
    from . import dataio, vq

    cfg = _effective_config(args)
    vq_cfg = dict(cfg["vq"])
    if args.steps is not None:
        vq_cfg["steps"] = args.steps
    if args.dry_run:
        _print_config(cfg, args.seed)
        return 0
    manifest = dataio.load_manifest(args.manifest)
    driver_size = tuple(cfg["synth"]["driver_size"])
    seed = derive_seed(args.seed, f"train-vq/{args.role}")
    model_cfg = vq.CodebookConfig(
        codebook_size=vq_cfg["codebook_size"],
        code_dim=vq_cfg["code_dim"],
        downsample_factor=vq_cfg["downsample_factor"],
        hidden_channels=vq_cfg["hidden_channels"],
    )
    model = vq.build_vq_model(model_cfg, seed=seed)
    hyper = vq.VqTrainConfig(
        lr=vq_cfg["lr"],
        batch_size=vq_cfg["batch_size"],
        steps=vq_cfg["steps"],
        beta=vq_cfg["beta"],
        seed=seed,
    )
    t0 = time.time()
    curve = vq.train_vq(
        model,
        manifest,
        hyper,
        role=args.role,
        transform_cfg=_transform_config(cfg["synth"]) if args.role == "driver" else None,
        log_every=args.log_every,
    )
    vq.save_vq(
        args.out,
        model,
        step=len(curve),
        extra={"role": args.role, "effective_config": cfg, "seed": args.seed,
               "final_loss": curve[-1] if curve else None},
    )
    print(f"trained vq[{args.role}] {len(curve)} steps in {time.time()-t0:.1f}s -> {args.out}")
    return 0


def cmd_train_artist(args) -> int:
    from . import artist, shards, vq

    cfg = _effective_config(args)
    art = dict(cfg["artist"])
    if args.layers is not None:
        art["n_layers"] = args.layers
    if args.steps is not None:
        art["steps"] = args.steps
    if args.dry_run:
        _print_config(cfg, args.seed)
        return 0
    vq_image = vq.load_vq(args.vq_image)
    vq_driver = vq.load_vq(args.vq_driver)
    dataset = shards.open_shards(args.shards)
    data = artist.tokenize_quadruplets(iter(dataset), vq_image, vq_driver)

    h_img, w_img = dataset[0].target.size
    h_drv, w_drv = dataset[0].driver.size
    f_img = vq_image.config.downsample_factor
    f_drv = vq_driver.config.downsample_factor
    layout = artist.SequenceLayout(
        source_shape=(h_img // f_img, w_img // f_img),
        driver_shape=(h_drv // f_drv, w_drv // f_drv),
        vocab_image=vq_image.config.codebook_size,
        vocab_driver=vq_driver.config.codebook_size,
    )
    seed = derive_seed(args.seed, "train-artist")
    model = artist.build_artist_model(
        artist.ArtistConfig(
            layout=layout,
            n_layers=art["n_layers"],
            n_heads=art["n_heads"],
            embed_dim=art["embed_dim"],
            driver_dropout=art["driver_dropout"],
        ),
        seed=seed,
    )
    hyper = artist.ArtistTrainConfig(
        lr=art["lr"],
        batch_size=art["batch_size"],
        steps=art["steps"],
        seed=seed,
        warmup_steps=art["warmup_steps"],
    )
    t0 = time.time()
    curve = artist.train_artist(model, data, hyper, log_every=args.log_every)
    artist.save_artist(
        args.out,
        model,
        vq_image_path=args.vq_image,
        vq_driver_path=args.vq_driver,
        step=len(curve),
        extra={"effective_config": cfg, "seed": args.seed,
               "final_nll": curve[-1] if curve else None},
    )
    print(f"trained artist {len(curve)} steps in {time.time()-t0:.1f}s -> {args.out}")
    return 0


def _resolve_vq_paths(args) -> tuple[Path, Path]:
    artist_path = Path(args.artist)
    vq_image = Path(args.vq_image) if args.vq_image else artist_path.parent / "vq_image.pt"
    vq_driver = Path(args.vq_driver) if args.vq_driver else artist_path.parent / "vq_driver.pt"
    return vq_image, vq_driver


def cmd_sample(args) -> int:
    from . import dataio, sampler
    from .imageops import Image, load_image, save_image

    cfg = _effective_config(args)
    if args.dry_run:
        _print_config(cfg, args.seed)
        return 0
    vq_image_path, vq_driver_path = _resolve_vq_paths(args)
    bundle = sampler.load_bundle(args.artist, vq_image_path, vq_driver_path)
    f = bundle.vq_image.config.downsample_factor
    lay = bundle.artist.layout
    image_size = (lay.source_shape[0] * f, lay.source_shape[1] * f)
    fd = bundle.vq_driver.config.downsample_factor
    driver_size = (lay.driver_shape[0] * fd, lay.driver_shape[1] * fd)

    source = load_image(args.source, size=image_size)
    region = dataio.load_mask(args.mask, expected_size=image_size)
    driver = load_image(args.driver, size=driver_size)
    masked = source.pixels * (1 - region.mask[None]).astype(np.float32)

    policy = sampler.SamplingPolicy(
        kind=args.policy, k=args.k, p=args.p, temperature=args.temperature, seed=args.seed
    )
    request = sampler.EditRequest(
        source=Image(pixels=masked, id=source.id),
        region=region,
        driver=driver,
        n_candidates=args.n,
        n_keep=args.keep,
        policy=policy,
    )
    run = sampler.sample_edit(bundle, request)
    from .embedder import ConvFeatureEmbedder

    embedder = ConvFeatureEmbedder(seed=0)
    scored = sampler.filter_by_driver(run.candidates, driver, embedder, len(run.candidates))
    kept = {c.index for c, _ in scored[: args.keep]}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sidecar = {
        "policy": asdict(policy),
        "seed": args.seed,
        "images_per_second": run.images_per_second,
        "effective_config": cfg,
        "candidates": [],
    }
    for cand, similarity in sorted(scored, key=lambda cs: cs[0].index):
        name = f"sample_{cand.index:02d}.png"
        save_image(cand.image, out / name)
        sidecar["candidates"].append(
            {
                "file": name,
                "index": cand.index,
                "nll": cand.nll,
                "similarity": similarity,
                "kept": cand.index in kept,
            }
        )
    (out / "samples.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(scored)} samples ({len(kept)} kept) to {out} "
          f"at {run.images_per_second:.2f} images/s")
    return 0


def cmd_evaluate(args) -> int:
    from . import dataio, evalkit, sampler

    cfg = _effective_config(args)
    ev = dict(cfg["eval"])
    if args.n_triplets is not None:
        ev["n_triplets"] = args.n_triplets
    if args.filter is not None:
        ev["use_filter"] = args.filter
    if args.dry_run:
        _print_config(cfg, args.seed)
        return 0
    vq_image_path, vq_driver_path = _resolve_vq_paths(args)
    bundle = sampler.load_bundle(args.artist, vq_image_path, vq_driver_path)
    manifest = dataio.load_manifest(args.manifest)
    region_cfg = evalkit.EvalRegionConfig(
        size=tuple(ev["region_size"]) if ev.get("region_size") else None,
        crop_ratio=ev["crop_ratio"],
    )
    seed = derive_seed(args.seed, "evaluate")
    driver_size = tuple(cfg["synth"]["driver_size"])
    triplets = evalkit.build_eval_triplets(
        manifest, ev["n_triplets"], region_cfg, seed=seed, driver_size=driver_size
    )
    config = evalkit.EvaluateConfig(
        n_candidates=cfg["sampler"]["n_candidates"],
        n_keep=cfg["sampler"]["n_keep"],
        policy_kind=cfg["sampler"]["policy"],
        p=cfg["sampler"]["p"],
        use_filter=ev["use_filter"],
        method=args.method,
        n_distractors=ev["n_distractors"],
        seed=seed,
    )
    report = evalkit.evaluate(bundle, triplets, config, manifest, region_cfg=region_cfg)
    report.save(args.out)
    print(
        f"{args.method}: fid_image={report.fid_image:.3f} fid_edit={report.fid_edit_region:.3f} "
        f"r@1={report.retrieval['r_at_1']:.3f} locality={report.locality_l1:.4f} -> {args.out}"
    )
    return 0


def cmd_serve(args) -> int:
    import os

    import uvicorn

    if args.ckpt_dir:
        os.environ["E2EVE_CKPT_DIR"] = str(args.ckpt_dir)
    if args.static_dir:
        os.environ["E2EVE_STATIC_DIR"] = str(args.static_dir)
    os.environ["E2EVE_MAX_JOBS"] = str(args.max_jobs)
    from .service import service_from_env

    app = service_from_env()
    port = args.port or int(os.environ.get("E2EVE_PORT", "8080"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def cmd_pipeline(args) -> int:
    from . import artist, dataio, editsynth, evalkit, sampler, shards, vq

    cfg = _effective_config(args)
    for section, key, value in (
        ("data", "n", args.n_images),
        ("vq", "steps", args.vq_steps),
        ("artist", "steps", args.artist_steps),
        ("eval", "n_triplets", args.n_triplets),
        ("synth", "per_image", args.per_image),
    ):
        if value is not None:
            cfg[section][key] = value
    if args.dry_run:
        _print_config(cfg, args.seed)
        return 0

    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)
    t_start = time.time()

    print("[1/6] toy corpus")
    manifest = dataio.make_toy_corpus(
        cfg["data"]["n"],
        tuple(cfg["data"]["image_size"]),
        seed=derive_seed(args.seed, "data"),
        out=work / "corpus",
        val_fraction=cfg["data"]["val_fraction"],
    )

    print("[2/6] synthesize quadruplets")
    syn = cfg["synth"]
    tcfg = _transform_config(syn)
    region_cfg = editsynth.BlockRegionConfig(
        area_range=tuple(syn["area_range"]), aspect_range=tuple(syn["aspect_range"])
    )
    synth_seed = derive_seed(args.seed, "synth/train")
    stream = editsynth.synthesize_dataset(
        manifest, tcfg, quadruplets_per_image=syn["per_image"], seed=synth_seed,
        region_cfg=region_cfg,
    )
    shards.write_shards(stream, work / "shards", config={"synth": syn}, seed=synth_seed)

    print("[3/6] train image quantizer")
    vq_cfg = cfg["vq"]
    model_cfg = vq.CodebookConfig(
        codebook_size=vq_cfg["codebook_size"],
        code_dim=vq_cfg["code_dim"],
        downsample_factor=vq_cfg["downsample_factor"],
        hidden_channels=vq_cfg["hidden_channels"],
    )
    hyper = vq.VqTrainConfig(
        lr=vq_cfg["lr"], batch_size=vq_cfg["batch_size"], steps=vq_cfg["steps"],
        beta=vq_cfg["beta"], seed=derive_seed(args.seed, "train-vq/image"),
    )
    vq_img = vq.build_vq_model(model_cfg, seed=hyper.seed)
    vq.train_vq(vq_img, manifest, hyper, role="image", log_every=args.log_every)
    vq.save_vq(work / "vq_image.pt", vq_img, step=hyper.steps, extra={"role": "image", "effective_config": cfg})

    print("[4/6] train driver quantizer")
    hyper_d = vq.VqTrainConfig(
        lr=vq_cfg["lr"], batch_size=vq_cfg["batch_size"], steps=vq_cfg["steps"],
        beta=vq_cfg["beta"], seed=derive_seed(args.seed, "train-vq/driver"),
    )
    vq_drv = vq.build_vq_model(model_cfg, seed=hyper_d.seed)
    vq.train_vq(vq_drv, manifest, hyper_d, role="driver", transform_cfg=tcfg, log_every=args.log_every)
    vq.save_vq(work / "vq_driver.pt", vq_drv, step=hyper_d.steps, extra={"role": "driver", "effective_config": cfg})

    print("[5/6] train generator")
    dataset = shards.open_shards(work / "shards")
    data = artist.tokenize_quadruplets(iter(dataset), vq_img, vq_drv)
    art = cfg["artist"]
    f = model_cfg.downsample_factor
    layout = artist.SequenceLayout(
        source_shape=(manifest.image_size[0] // f, manifest.image_size[1] // f),
        driver_shape=(syn["driver_size"][0] // f, syn["driver_size"][1] // f),
        vocab_image=model_cfg.codebook_size,
        vocab_driver=model_cfg.codebook_size,
    )
    artist_seed = derive_seed(args.seed, "train-artist")
    model = artist.build_artist_model(
        artist.ArtistConfig(
            layout=layout, n_layers=art["n_layers"], n_heads=art["n_heads"],
            embed_dim=art["embed_dim"], driver_dropout=art["driver_dropout"],
        ),
        seed=artist_seed,
    )
    artist.train_artist(
        model, data,
        artist.ArtistTrainConfig(
            lr=art["lr"], batch_size=art["batch_size"], steps=art["steps"],
            seed=artist_seed, warmup_steps=art["warmup_steps"],
        ),
        log_every=args.log_every,
    )
    artist.save_artist(
        work / "artist.pt", model,
        vq_image_path=work / "vq_image.pt", vq_driver_path=work / "vq_driver.pt",
        step=art["steps"], extra={"effective_config": cfg},
    )

    print("[6/6] evaluate")
    bundle = sampler.load_bundle(work / "artist.pt", work / "vq_image.pt", work / "vq_driver.pt")
    ev = cfg["eval"]
    region_cfg_eval = evalkit.EvalRegionConfig(
        size=tuple(ev["region_size"]) if ev.get("region_size") else None,
        crop_ratio=ev["crop_ratio"],
    )
    eval_seed = derive_seed(args.seed, "evaluate")
    triplets = evalkit.build_eval_triplets(
        manifest, ev["n_triplets"], region_cfg_eval, seed=eval_seed,
        driver_size=tuple(syn["driver_size"]),
    )
    config = evalkit.EvaluateConfig(
        n_candidates=cfg["sampler"]["n_candidates"], n_keep=cfg["sampler"]["n_keep"],
        policy_kind=cfg["sampler"]["policy"], p=cfg["sampler"]["p"],
        use_filter=ev["use_filter"], n_distractors=ev["n_distractors"], seed=eval_seed,
    )
    report = evalkit.evaluate(bundle, triplets, config, manifest, region_cfg=region_cfg_eval)
    report_path = work / "report.json"
    report.save(report_path)
    print(
        f"pipeline done in {time.time()-t_start:.0f}s: "
        f"fid_edit={report.fid_edit_region:.3f} r@1={report.retrieval['r_at_1']:.3f} "
        f"locality={report.locality_l1:.4f} -> {report_path}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="e2eve", description=__doc__)
    parser.add_argument("--version", action="version", version=f"e2eve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_data = sub.add_parser("data", help="ingest a folder or generate the toy corpus")
    data_sub = p_data.add_subparsers(dest="data_cmd", required=True)
    p_ingest = data_sub.add_parser("ingest")
    p_ingest.add_argument("--src", type=Path, required=True)
    p_ingest.add_argument("--size", type=int, nargs=2, metavar=("H", "W"), required=True)
    p_ingest.add_argument("--val", type=float, default=0.1)
    p_ingest.add_argument("--seed", type=int, default=0)
    p_toy = data_sub.add_parser("toy")
    p_toy.add_argument("--n", type=int, required=True)
    p_toy.add_argument("--size", type=int, nargs=2, metavar=("H", "W"), required=True)
    p_toy.add_argument("--seed", type=int, default=0)
    p_toy.add_argument("--out", type=Path, required=True)
    p_toy.add_argument("--val", type=float, default=0.2)
    p_data.set_defaults(func=cmd_data)

    p_synth = sub.add_parser("synth", help="synthesize training quadruplets into shards")
    p_synth.add_argument("--manifest", type=Path, required=True)
    p_synth.add_argument("--alpha", type=float, nargs=2, metavar=("MIN", "MAX"))
    p_synth.add_argument("--pos-aug", dest="pos_aug", action="store_true", default=None)
    p_synth.add_argument("--no-pos-aug", dest="pos_aug", action="store_false")
    p_synth.add_argument("--size-aug", dest="size_aug", action="store_true", default=None)
    p_synth.add_argument("--no-size-aug", dest="size_aug", action="store_false")
    p_synth.add_argument("--per-image", type=int, default=None)
    p_synth.add_argument("--driver-size", type=int, nargs=2, default=None)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--split", choices=["train", "val"], default="train")
    p_synth.add_argument("--freeform", action="store_true")
    p_synth.add_argument("--out", type=Path, required=True)
    _add_preset_args(p_synth)
    p_synth.set_defaults(func=cmd_synth)

    p_vq = sub.add_parser("train-vq", help="train a quantized autoencoder")
    p_vq.add_argument("--role", choices=["image", "driver"], required=True)
    p_vq.add_argument("--manifest", type=Path, required=True)
    p_vq.add_argument("--steps", type=int, default=None)
    p_vq.add_argument("--seed", type=int, default=0)
    p_vq.add_argument("--out", type=Path, required=True)
    p_vq.add_argument("--log-every", type=int, default=0)
    _add_preset_args(p_vq)
    p_vq.set_defaults(func=cmd_train_vq)

    p_art = sub.add_parser("train-artist", help="train the conditional generator")
    p_art.add_argument("--shards", type=Path, required=True)
    p_art.add_argument("--vq-image", type=Path, required=True)
    p_art.add_argument("--vq-driver", type=Path, required=True)
    p_art.add_argument("--layers", type=int, default=None)
    p_art.add_argument("--steps", type=int, default=None)
    p_art.add_argument("--seed", type=int, default=0)
    p_art.add_argument("--out", type=Path, required=True)
    p_art.add_argument("--log-every", type=int, default=0)
    _add_preset_args(p_art)
    p_art.set_defaults(func=cmd_train_artist)

    p_sample = sub.add_parser("sample", help="sample edits for one input")
    p_sample.add_argument("--artist", type=Path, required=True)
    p_sample.add_argument("--vq-image", type=Path, default=None)
    p_sample.add_argument("--vq-driver", type=Path, default=None)
    p_sample.add_argument("--source", type=Path, required=True)
    p_sample.add_argument("--mask", type=Path, required=True)
    p_sample.add_argument("--driver", type=Path, required=True)
    p_sample.add_argument("--n", type=int, default=20)
    p_sample.add_argument("--keep", type=int, default=10)
    p_sample.add_argument("--policy", choices=["greedy", "top_k", "top_p"], default="top_p")
    p_sample.add_argument("--p", type=float, default=0.9)
    p_sample.add_argument("--k", type=int, default=1)
    p_sample.add_argument("--temperature", type=float, default=1.0)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", type=Path, required=True)
    _add_preset_args(p_sample)
    p_sample.set_defaults(func=cmd_sample)

    p_eval = sub.add_parser("evaluate", help="run the metric protocol")
    p_eval.add_argument("--artist", type=Path, required=True)
    p_eval.add_argument("--vq-image", type=Path, default=None)
    p_eval.add_argument("--vq-driver", type=Path, default=None)
    p_eval.add_argument("--manifest", type=Path, required=True)
    p_eval.add_argument("--n-triplets", type=int, default=None)
    p_eval.add_argument("--filter", dest="filter", action="store_true", default=None)
    p_eval.add_argument("--no-filter", dest="filter", action="store_false")
    p_eval.add_argument("--method", choices=["e2eve", "copy_paste", "inpaint"], default="e2eve")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", type=Path, required=True)
    _add_preset_args(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_serve = sub.add_parser("serve", help="run the HTTP editing service")
    p_serve.add_argument("--ckpt-dir", type=Path, default=None)
    p_serve.add_argument("--static-dir", type=Path, default=None)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--max-jobs", type=int, default=2)
    p_serve.set_defaults(func=cmd_serve)

    p_pipe = sub.add_parser("pipeline", help="toy corpus -> synth -> train x3 -> evaluate")
    p_pipe.add_argument("--workdir", type=Path, default=Path("pipeline_out"))
    p_pipe.add_argument("--seed", type=int, default=0)
    p_pipe.add_argument("--n-images", type=int, default=None)
    p_pipe.add_argument("--per-image", type=int, default=None)
    p_pipe.add_argument("--vq-steps", type=int, default=None)
    p_pipe.add_argument("--artist-steps", type=int, default=None)
    p_pipe.add_argument("--n-triplets", type=int, default=None)
    p_pipe.add_argument("--log-every", type=int, default=0)
    _add_preset_args(p_pipe)
    p_pipe.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (E2eveError, OSError, ValueError, KeyError) as e:
        print(
            json.dumps({"error": type(e).__name__, "message": str(e)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
