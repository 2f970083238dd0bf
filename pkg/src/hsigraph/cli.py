"""Command-line entry point: ``hsigraph {synth,segment,classify,eval,render}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import data_io
from .evaluation import confusion_matrix, metrics, run_trials, sample_training_labels
from .pipelines import BUILTIN_CONFIGS, ConfigError, PipelineConfig, builtin_config, load_config, prepare, run_method
from .superpixels import write_segmentation_pgm


class CliError(Exception):
    pass


def _config_from_args(args) -> PipelineConfig:
    if args.config is None:
        config = PipelineConfig()
    elif args.config in BUILTIN_CONFIGS and not Path(args.config).exists():
        config = builtin_config(args.config)
    else:
        config = load_config(args.config)
    overrides = {}
    for flag, key in (("superpixels", "superpixel_count"), ("neighbors", "k"),
                      ("compactness", "compactness"), ("variance", "variance_target")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            overrides[key] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key] = raw
    return config.replace(**overrides) if overrides else config


def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file or builtin name (%s)" % ", ".join(BUILTIN_CONFIGS))
    p.add_argument("--superpixels", type=int, help="override superpixel_count")
    p.add_argument("--neighbors", type=int, help="override k (edges per node)")
    p.add_argument("--compactness", type=float, help="override SLIC compactness")
    p.add_argument("--variance", type=float, help="override PCA variance_target")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key, dotted for nested (e.g. mgl.gamma=0)")


def build_parser():
    parser = argparse.ArgumentParser(prog="hsigraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic blocked scene")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--width", type=int, default=60)
    p.add_argument("--height", type=int, default=60)
    p.add_argument("--bands", type=int, default=20)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("segment", help="write the superpixel ids of a cube as a PGM")
    p.add_argument("--cube", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("classify", help="sample training labels, classify, write maps")
    p.add_argument("--cube", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--labels-per-class", type=int, required=True)
    p.add_argument("--method", choices=("mgl", "pmgl"), default="mgl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-map", required=True, help="rendered P6 class map")
    p.add_argument("--out-pred", required=True, help="raw prediction PGM (class ids)")
    p.add_argument("--palette", help="palette JSON; default is generated")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="repeated randomized trials, OA/AA/kappa report")
    p.add_argument("--cube", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--method", choices=("mgl", "pmgl"), default="mgl")
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="CSV report; a JSON twin is written alongside")
    _add_config_flags(p)

    p = sub.add_parser("render", help="render a prediction PGM with a palette")
    p.add_argument("--pred", required=True)
    p.add_argument("--palette", help="palette JSON; default is generated")
    p.add_argument("--out", required=True)
    return parser


def _cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cube, gt = data_io.generate_synthetic_scene(args.width, args.height, args.bands,
                                                args.classes, args.noise, args.seed)
    outputs = [out / "cube.json", out / "cube.raw", out / "gt.pgm"]
    return outputs, lambda: (data_io.save_cube(cube, outputs[0]),
                             data_io.save_ground_truth(gt, outputs[2]))


def _cmd_segment(args):
    config = _config_from_args(args)
    cube = data_io.load_cube(args.cube)
    seg = prepare(cube, config).segmentation
    return [Path(args.out)], lambda: write_segmentation_pgm(seg, args.out)


def _palette(path, num_classes):
    return data_io.ClassPalette.load(path) if path else data_io.ClassPalette.default(num_classes)


def _cmd_classify(args):
    config = _config_from_args(args)
    cube = data_io.load_cube(args.cube)
    gt = data_io.load_ground_truth(args.gt)
    if (gt.height, gt.width) != (cube.height, cube.width):
        raise CliError("ground truth and cube dimensions differ")
    train = sample_training_labels(gt, args.labels_per_class, args.seed)
    pred, _ = run_method(args.method, cube, train, config, num_classes=gt.num_classes)
    palette = _palette(args.palette, gt.num_classes)
    m = metrics(confusion_matrix(pred, gt, train > 0))
    print(f"OA={m.oa:.4f} AA={m.aa:.4f} kappa={m.kappa:.4f}")

    def write():
        data_io.write_pgm(args.out_pred, pred)
        data_io.render_label_map(pred, palette, args.out_map)
    return [Path(args.out_pred), Path(args.out_map)], write


def _cmd_eval(args):
    config = _config_from_args(args)
    cube = data_io.load_cube(args.cube)
    gt = data_io.load_ground_truth(args.gt)
    if (gt.height, gt.width) != (cube.height, cube.width):
        raise CliError("ground truth and cube dimensions differ")
    report = run_trials(cube, gt, args.method, config, args.per_class, args.trials,
                        base_seed=args.seed, jobs=args.jobs)
    s = report.summary()
    print(f"{args.method}: OA={s['oa_mean']:.4f}+-{s['oa_std']:.4f} "
          f"AA={s['aa_mean']:.4f}+-{s['aa_std']:.4f} kappa={s['kappa_mean']:.4f}+-{s['kappa_std']:.4f}")
    out = Path(args.out)
    json_path = out.with_suffix(".json")
    return [out, json_path], lambda: (report.to_csv(out), report.to_json(json_path))


def _cmd_render(args):
    pred = data_io.read_pgm(args.pred)
    palette = _palette(args.palette, int(pred.max()))
    return [Path(args.out)], lambda: data_io.render_label_map(pred, palette, args.out)


COMMANDS = {"synth": _cmd_synth, "segment": _cmd_segment, "classify": _cmd_classify,
            "eval": _cmd_eval, "render": _cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    outputs = []
    try:
        outputs, write = COMMANDS[args.command](args)
        write()
    except (CliError, ConfigError, ValueError, OSError) as exc:
        data_io.remove_quietly(*outputs)
        print(f"hsigraph {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except BaseException:
        data_io.remove_quietly(*outputs)
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
