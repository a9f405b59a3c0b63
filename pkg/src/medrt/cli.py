"""medrt command line: datagen, train, cv, compress, eval, infer, serve,
bench, sim.

Every subcommand accepts --config FILE (JSON keyed by flag name) whose
values act as defaults; explicit flags win. Exit codes: 0 success,
1 validation/configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from medrt.errors import (ConfigurationError, MedRTError, ParseError,
                          ValidationError)


def _load_config(path):
    with open(path) as f:
        return json.load(f)


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser):
    """--config JSON supplies defaults for any flag left at its default."""
    if not getattr(args, "config", None):
        return args
    overrides = _load_config(args.config)
    defaults = {a.dest: a.default for a in parser._actions}
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if dest in defaults and getattr(args, dest) == defaults[dest]:
            setattr(args, dest, value)
    return args


def _dataset(args, require_masks=False):
    from medrt.training import DatasetSpec, generate_phantoms
    from medrt.training.io import load_dataset_dir
    if getattr(args, "data", None):
        return load_dataset_dir(args.data)
    spec = DatasetSpec(seed=args.seed, count=args.count,
                       image_size=getattr(args, "image_size", 64),
                       lesion_prob=getattr(args, "lesion_prob", 0.5))
    return generate_phantoms(spec)


def _train_config(args, loss):
    from medrt.training import TrainConfig
    return TrainConfig(optimizer=args.optimizer, lr_max=args.lr_max,
                       lr_min=args.lr_min, warmup_steps=args.warmup_steps,
                       total_steps=args.total_steps, batch_size=args.batch_size,
                       max_epochs=args.epochs, patience=args.patience, loss=loss,
                       seed=args.seed, augment=not args.no_augment)


def cmd_datagen(args):
    from medrt.training import DatasetSpec, generate_phantoms
    from medrt.training.io import export_dataset
    spec = DatasetSpec(seed=args.seed, count=args.count, image_size=args.image_size,
                       lesion_prob=args.lesion_prob)
    samples = generate_phantoms(spec)
    out = export_dataset(samples, args.out, spec=spec, dicom=not args.no_dicom)
    print(f"wrote {len(samples)} phantoms to {out}")
    return 0


def cmd_train(args):
    from medrt.nn import build, save_params
    from medrt.training import train
    data = _dataset(args)
    params = build(args.model, seed=args.seed)
    loss = "ce" if args.model == "tiny_class_net" else "bce_dice"
    trained, history = train(params.net, data, _train_config(args, loss))
    Path(args.out).write_bytes(save_params(trained))
    if args.history:
        with open(args.history, "w") as f:
            json.dump(history, f, indent=1)
    last = history[-1]
    print(f"trained {args.model}: epochs={len(history)} "
          f"val_loss={last['val_loss']:.4f} val_metric={last['val_metric']:.4f}")
    print(f"params -> {args.out}")
    return 0


def cmd_cv(args):
    from medrt.nn import build
    from medrt.training import kfold_split, run_cv
    data = _dataset(args)
    params = build(args.model, seed=args.seed)
    loss = "ce" if args.model == "tiny_class_net" else "bce_dice"
    labels = [s.class_label for s in data]
    plan = kfold_split(len(data), args.k, labels, seed=args.seed)
    report = run_cv(params.net, data, plan, _train_config(args, loss))
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def cmd_compress(args):
    from medrt.nn import load_params, save_params
    from medrt.compress import estimate_cost, prune_structured, quantize_model
    params = load_params(Path(args.params).read_bytes())
    if args.action == "prune":
        net2, p2, plan = prune_structured(params.net, params, args.fraction)
        Path(args.out).write_bytes(save_params(p2))
        print(json.dumps(plan.to_json(), indent=1, sort_keys=True))
        print(f"pruned params -> {args.out}")
    elif args.action == "quantize":
        from medrt.training import batch_arrays
        calib_set = _dataset(args)[:args.calib]
        calib = [batch_arrays([s])[0] for s in calib_set]
        qp = quantize_model(params, calib, method=args.method)
        Path(args.out).write_bytes(save_params(qp))
        print(f"quantized params ({len(qp.fallback_layers)} fallback layers) "
              f"-> {args.out}")
    else:  # cost
        report = estimate_cost(params.net, args.precision, args.device)
        print(report.text_table())
        if args.out:
            Path(args.out).write_text(
                json.dumps(report.to_json(), indent=1, sort_keys=True))
    return 0


def cmd_eval(args):
    from medrt.nn import load_params
    from medrt.gateway.bench import measure_latency
    from medrt.metrics import (auc_roc, confusion_from_predictions, dice, iou_mask,
                               mean_average_precision, pixel_accuracy, prf1)
    from medrt.pipeline.service import ModelBundle
    from medrt.training import batch_arrays

    data = _dataset(args)
    params = load_params(Path(args.params).read_bytes())
    unet = load_params(Path(args.unet).read_bytes()) if args.unet else None
    classifier = params if params.net.name == "tiny_class_net" else None
    if params.net.name == "mini_unet":
        unet = params
        classifier = None

    report = {k: None for k in ("accuracy", "precision", "recall", "f1", "auc",
                                "dice", "iou", "pixel_acc", "map")}
    from medrt.nn import forward, Tensor
    latencies_params = classifier or unet

    if classifier is not None:
        imgs, labels, _ = batch_arrays(data)
        scores = []
        for i in range(0, len(data), 32):
            out, _ = forward(classifier.net, classifier, Tensor(imgs[i:i + 32]),
                             classifier.precision)
            scores.extend(out.data[:, 1].tolist())
        preds = [1 if s >= 0.5 else 0 for s in scores]
        counts = confusion_from_predictions(preds, labels)
        m = prf1(counts)
        report.update(accuracy=m["accuracy"], precision=m["precision"],
                      recall=m["recall"], f1=m["f1"])
        if len(set(labels.tolist())) == 2:
            report["auc"] = auc_roc(np.asarray(scores), labels)
    if unet is not None:
        bundle = ModelBundle(unet if classifier is None else classifier,
                             unet if classifier is not None else None)
        dices, ious, pixaccs = [], [], []
        preds_per_image, gts_per_image = [], []
        imgs, _, masks = batch_arrays(data)
        for i in range(0, len(data), 32):
            out, _ = forward(unet.net, unet, Tensor(imgs[i:i + 32]), unet.precision)
            for j in range(out.shape[0]):
                probs = out.data[j, 0]
                binary = (probs >= 0.5).astype(np.uint8)
                gt = (masks[i + j, 0] > 0.5).astype(np.uint8)
                dices.append(dice(binary, gt))
                ious.append(iou_mask(binary, gt))
                pixaccs.append(pixel_accuracy(binary, gt))
                preds_per_image.append(bundle.detect_boxes(probs))
                gts_per_image.append([tuple(map(float, b))
                                      for b in data[i + j].boxes])
        report.update(dice=float(np.mean(dices)), iou=float(np.mean(ious)),
                      pixel_acc=float(np.mean(pixaccs)),
                      map=mean_average_precision(preds_per_image, gts_per_image))
    inputs = [batch_arrays([s])[0] for s in data[:16]]
    lat = measure_latency(latencies_params, inputs, warmup=args.warmup,
                          iters=args.iters)
    report["latency"] = lat.to_json()
    text = json.dumps(report, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def cmd_infer(args):
    from medrt.nn import load_params
    from medrt.explain import (OverlaySpec, SaliencyLayer, grad_cam, occlusion_map,
                               render_overlay_png, uncertainty_map)
    from medrt.nn import Tensor, forward
    from medrt.pipeline.service import ModelBundle

    params = load_params(Path(args.params).read_bytes())
    unet = load_params(Path(args.unet).read_bytes()) if args.unet else None
    bundle = ModelBundle(params, unet)
    blob = Path(args.input).read_bytes()
    decoded = bundle.decode(blob)
    output = bundle.infer(Tensor(decoded.normalized.data[None]))[0]
    post = bundle.postprocess(decoded.raw_resized, output)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "overlay.png").write_bytes(post["overlay_png"])
    (out / "base.png").write_bytes(post["base_png"])
    if post.get("saliency_png"):
        (out / "uncertainty.png").write_bytes(post["saliency_png"])
    result = {k: v for k, v in post.items()
              if k not in ("overlay_png", "base_png", "saliency_png", "boxes",
                           "mask_rle", "mask_shape")}
    result["boxes"] = [{"box": list(b.box), "score": b.score, "label": b.label}
                       for b in post["boxes"]]
    sidecar = {"study_id": Path(args.input).stem,
               "layers": ["mask", "uncertainty", "boxes"],
               "spec": bundle.overlay.to_json()}
    if args.explain:
        x = decoded.normalized
        if args.explain == "gradcam":
            _, trace = forward(params.net, params, x,
                               "f32" if params.precision == "int8" else params.precision)
            cls = int(np.argmax(output["probs"]))
            sal = grad_cam(params.net, params, trace, cls) \
                if params.precision != "int8" else None
            if sal is None:
                raise ConfigurationError("gradcam needs f32 params (int8 given)")
        elif args.explain == "occlusion":
            cls = int(np.argmax(output["probs"]))
            sal = occlusion_map(params.net, params, x, cls,
                                precision=params.precision)
        else:
            if output.get("mask_probs") is None:
                raise ConfigurationError("uncertainty explain needs a mask model")
            sal = uncertainty_map(output["mask_probs"])
        png = render_overlay_png(decoded.raw_resized, [SaliencyLayer(sal)],
                                 OverlaySpec(opacity=0.6, colormap="hot"))
        (out / f"explain_{args.explain}.png").write_bytes(png)
        sidecar["layers"].append(args.explain)
    (out / "result.json").write_text(json.dumps(result, indent=1, sort_keys=True))
    (out / "overlay.json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))
    print(f"label={result['label']} score={result['score']:.4f} -> {out}")
    return 0


def cmd_serve(args):
    import uvicorn
    from medrt.gateway.app import create_app
    from medrt.gateway.config import ServerConfig
    from medrt.nn import load_params
    from medrt.pipeline.service import ModelBundle
    config = ServerConfig.from_file(args.server_config)
    if args.port:
        config.port = args.port
        ServerConfig.__post_init__(config)
    if not config.model_path:
        raise ConfigurationError("server config needs model_path")
    classifier = load_params(Path(config.model_path).read_bytes())
    unet = (load_params(Path(config.unet_path).read_bytes())
            if config.unet_path else None)
    bundle = ModelBundle(classifier, unet, thresholds=config.thresholds,
                         use_early_exit=config.pipeline.tau_exit is not None)
    app = create_app(config, bundle)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


def cmd_bench(args):
    from medrt.gateway.bench import bench_run
    from medrt.nn import load_params
    params = load_params(Path(args.params).read_bytes())
    data = _dataset(args)
    holdout = max(int(0.2 * len(data)), 1)
    test_set = data[-holdout:]
    train_set = data[:-holdout] or data
    devices = tuple(args.devices.split(","))
    report = bench_run(params, train_set, test_set, devices=devices,
                       warmup=args.warmup, iters=args.iters, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_bytes(report.to_json_bytes())
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.txt").write_text(report.text_table())
    print(report.text_table())
    return 0


def cmd_sim(args):
    from medrt.pipeline import PipelineConfig, load_workload, run_sim
    workload = load_workload(args.workload)
    if args.seed is not None:
        from dataclasses import replace
        workload = replace(workload, seed=args.seed)
    cfg_kw = {}
    if args.pipeline_config:
        raw = _load_config(args.pipeline_config)
        from medrt.pipeline import BatcherConfig
        if "batcher" in raw:
            raw["batcher"] = BatcherConfig(**raw["batcher"])
        cfg_kw = raw
    stats = run_sim(workload, PipelineConfig(**cfg_kw))
    Path(args.out).write_bytes(stats.to_json_bytes())
    if args.depth_csv:
        Path(args.depth_csv).write_text(stats.depth_csv())
    print(f"completed={stats.completed} shed={stats.shed} "
          f"saturated={stats.saturated} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medrt",
                                     description="real-time medical image stack")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with flag defaults")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("datagen", help="generate a phantom dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--lesion-prob", type=float, default=0.5)
    p.add_argument("--no-dicom", action="store_true")
    p.set_defaults(fn=cmd_datagen)

    def train_flags(p):
        common(p)
        p.add_argument("--model", default="tiny_class_net",
                       choices=["tiny_class_net", "mini_unet"])
        p.add_argument("--data", help="dataset directory (else generated)")
        p.add_argument("--count", type=int, default=500)
        p.add_argument("--optimizer", default="adam",
                       choices=["adam", "sgd-momentum"])
        p.add_argument("--lr-max", type=float, default=2e-3)
        p.add_argument("--lr-min", type=float, default=1e-4)
        p.add_argument("--warmup-steps", type=int, default=30)
        p.add_argument("--total-steps", type=int, default=600)
        p.add_argument("--batch-size", type=int, default=16)
        p.add_argument("--epochs", type=int, default=4)
        p.add_argument("--patience", type=int, default=3)
        p.add_argument("--no-augment", action="store_true")

    p = sub.add_parser("train", help="train a zoo model on phantoms")
    train_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("cv", help="k-fold cross-validation")
    train_flags(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_cv)

    p = sub.add_parser("compress", help="prune / quantize / cost-model")
    csub = p.add_subparsers(dest="action", required=True)
    pp = csub.add_parser("prune")
    common(pp)
    pp.add_argument("--params", required=True)
    pp.add_argument("--fraction", type=float, default=0.5)
    pp.add_argument("--out", required=True)
    pq = csub.add_parser("quantize")
    common(pq)
    pq.add_argument("--params", required=True)
    pq.add_argument("--calib", type=int, default=32)
    pq.add_argument("--count", type=int, default=64)
    pq.add_argument("--data")
    pq.add_argument("--method", default="minmax")
    pq.add_argument("--out", required=True)
    pc = csub.add_parser("cost")
    common(pc)
    pc.add_argument("--params", required=True)
    pc.add_argument("--device", default="edge",
                    choices=["edge", "server", "cloud"])
    pc.add_argument("--precision", default="f32", choices=["f32", "int8"])
    pc.add_argument("--out")
    for q in (pp, pq, pc):
        q.set_defaults(fn=cmd_compress)

    p = sub.add_parser("eval", help="metrics report for a params file")
    common(p)
    p.add_argument("--params", required=True)
    p.add_argument("--unet")
    p.add_argument("--data")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--warmup", type=int, default=20)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="run one study through the models")
    common(p)
    p.add_argument("--params", required=True)
    p.add_argument("--unet")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--explain", choices=["gradcam", "occlusion", "uncertainty"])
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    common(p)
    p.add_argument("--server-config", required=True)
    p.add_argument("--port", type=int)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("bench", help="latency/accuracy tradeoff report")
    common(p)
    p.add_argument("--params", required=True)
    p.add_argument("--data")
    p.add_argument("--count", type=int, default=400)
    p.add_argument("--devices", default="measured,edge,server,cloud")
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("sim", help="virtual-clock pipeline simulation")
    common(p)
    p.add_argument("--workload", required=True)
    p.add_argument("--pipeline-config")
    p.add_argument("--out", required=True)
    p.add_argument("--depth-csv")
    p.set_defaults(fn=cmd_sim)
    p.set_defaults(seed=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        sub = None
        for action in parser._subparsers._group_actions:
            sub = action.choices.get(args.command)
        if sub is not None:
            _apply_config(args, sub)
        return args.fn(args)
    except (ValidationError, ConfigurationError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except MedRTError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
