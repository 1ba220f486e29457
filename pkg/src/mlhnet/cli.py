"""Command-line entry point: ``mlhnet <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import SyntheticSpec, build_modelnet_dataset, build_synthetic_dataset
from .errors import MLHError
from .formats import read_dataset, read_descriptor, write_dataset, write_descriptor
from .mesh_io import load_mesh
from .mlh import (CANONICAL_VIEWS, compute_mlh, compute_mlh_normalized, export_layer_image,
                  orient_and_normalize, save_image)
from .mv_merge import VARIANTS, MultiViewConfig
from .nn.optim import SgdConfig
from .sampling import SamplingConfig, required_point_count, sample_surface
from .training import evaluate, load_network, save_network, train
from .voxel_oracle import consistency_check, voxelize_points

log = logging.getLogger("mlhnet")


def _write_json(path, obj):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cloud(mesh, n, k, seed):
    cfg = SamplingConfig(rng_seed=seed)
    return sample_surface(mesh, required_point_count(mesh, n, k, cfg), seed)


def cmd_compute(a):
    mesh = load_mesh(a.mesh)
    cloud = _cloud(mesh, a.n, a.k, a.seed)
    views = CANONICAL_VIEWS if a.view == "all" else [v for v in CANONICAL_VIEWS if v.axis == a.view]
    out = Path(a.output)
    for v in views:
        desc = compute_mlh(cloud, a.n, a.k, v)
        path = out if a.view != "all" else out.with_name(f"{out.stem}_{v.axis}{out.suffix or '.mlhd'}")
        write_descriptor(desc, path)
        log.info("wrote %s", path)
    return 0


def cmd_batch(a):
    ds = build_modelnet_dataset(a.dir, a.n, a.k, a.seed, a.workers)
    write_dataset(ds, a.output)
    log.info("wrote %d records in %d classes to %s", len(ds.records), len(ds.classes), a.output)
    return 0


def cmd_gen_synthetic(a):
    spec = SyntheticSpec(a.classes, a.per_class)
    ds = build_synthetic_dataset(spec, a.n, a.k, a.seed, a.workers)
    write_dataset(ds, a.output)
    log.info("wrote %d records to %s", len(ds.records), a.output)
    return 0


def cmd_train(a):
    ds = read_dataset(a.dataset)
    cfg = MultiViewConfig.from_variant(a.merge, classes=len(ds.classes), N=ds.N, k=ds.k,
                                       width=a.width, hidden=a.hidden)
    sgd = SgdConfig(learning_rate=a.lr, momentum=a.momentum, epochs=a.epochs,
                    batch_size=a.batch, decay_epoch=a.decay_epoch)
    report, net = train(ds, cfg, sgd, a.seed)
    if a.output:
        save_network(net, a.output)
    _write_json(a.report, report.to_dict())
    return 0


def cmd_eval(a):
    net = load_network(a.checkpoint)
    ds = read_dataset(a.dataset)
    acc, cm = evaluate(net, ds, a.split)
    _write_json(a.report, {"split": a.split, "accuracy": acc, "confusion": cm.tolist(),
                           "classes": list(ds.classes)})
    return 0


def cmd_render(a):
    desc = read_descriptor(a.descriptor)
    save_image(export_layer_image(desc, a.layer), a.output)
    return 0


def cmd_check(a):
    r = a.r or a.n
    mesh = load_mesh(a.mesh)
    cloud = _cloud(mesh, a.n, a.k, a.seed)
    ok = True
    results = {}
    for v in CANONICAL_VIEWS:
        norm = orient_and_normalize(cloud, v)
        desc = compute_mlh_normalized(norm.points, a.n, a.k, v)
        rep = consistency_check(desc, voxelize_points(norm, r))
        results[v.axis] = rep.as_dict()
        ok &= rep.passed
        print(f"view {v.axis}: violations={len(rep.violations)} "
              f"occupancy_mismatches={len(rep.occupancy_mismatches)} "
              f"max_deviation={rep.max_deviation:.6g}")
    if a.report:
        _write_json(a.report, {"passed": ok, "views": results})
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="mlhnet", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def grid(sp, n):
        sp.add_argument("--n", type=int, default=n, help="grid resolution N")
        sp.add_argument("--k", type=int, default=5, help="layers per bin")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("compute", help="descriptor(s) of one mesh")
    sp.add_argument("mesh")
    sp.add_argument("--view", choices=["x", "y", "z", "all"], default="z")
    grid(sp, 256)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_compute)

    sp = sub.add_parser("batch", help="dataset from a class/{train,test}/*.off tree")
    sp.add_argument("dir")
    grid(sp, 32)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_batch)

    sp = sub.add_parser("gen-synthetic", help="dataset of jittered primitives")
    sp.add_argument("--classes", type=int, default=4)
    sp.add_argument("--per-class", type=int, default=200)
    grid(sp, 32)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_gen_synthetic)

    sp = sub.add_parser("train", help="train a three-view network")
    sp.add_argument("dataset")
    sp.add_argument("--merge", choices=list(VARIANTS), default="ind-cat")
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--batch", type=int, default=8)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--momentum", type=float, default=0.9)
    sp.add_argument("--decay-epoch", type=int, default=10)
    sp.add_argument("--width", type=int, default=32)
    sp.add_argument("--hidden", type=int, default=128)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output")
    sp.add_argument("--report", default="-")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy and confusion matrix of a checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("dataset")
    sp.add_argument("--split", choices=["train", "test"], default="test")
    sp.add_argument("--report", default="-")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("render", help="one descriptor layer as PGM/PNG")
    sp.add_argument("descriptor")
    sp.add_argument("--layer", type=int, default=1)
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("check", help="voxel-oracle consistency of a mesh's descriptors")
    sp.add_argument("mesh")
    grid(sp, 32)
    sp.add_argument("--r", type=int, default=None, help="oracle resolution (multiple of N)")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MLHError, OSError) as exc:
        print(f"mlhnet {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
