"""``uwdepth`` command line.

Exit codes: 0 on success, 2 for bad input, 3 when a quantity is numerically
undefined (e.g. a constant prior in a correlation).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from uwdepth import evalmetrics
from uwdepth.cli import commands
from uwdepth.cli.manifest import SequenceManifest
from uwdepth.errors import DegenerateError, InputError
from uwdepth.imagecore import load_image, save_image
from uwdepth.photoloss import LossConfig

log = logging.getLogger("uwdepth")

EXIT_INPUT = 2
EXIT_DEGENERATE = 3


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", type=Path, help="loss config (.json or .toml)", **kw)
    p.add_argument("--seed", type=int, help="random seed", **kw)
    p.add_argument("--jobs", type=int, help="worker threads for frame-level work", **kw)
    p.add_argument("--out", type=Path, help="output directory", **kw)


def _loss_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float)
    p.add_argument("--lvw-window", type=int)
    p.add_argument("--corr-weight", type=float)
    p.add_argument("--no-lvw", action="store_true", help="use unit weights instead of LVW")
    p.add_argument("--no-min-composite", action="store_true", help="average over sources instead of min")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uwdepth", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, suppress=True)
        return p

    p = add("synth", "render a synthetic underwater sequence")
    p.add_argument("scene", type=Path, help="scene description JSON")

    p = add("loss", "total loss of one frame against its neighbors")
    p.add_argument("manifest", type=Path)
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--depth", type=Path, help="depth PFM to use instead of the manifest's")
    p.add_argument("--maps", action="store_true", help="write loss map and LVW mask images")
    _loss_flags(p)

    p = add("frame-gap", "reprojection loss as a function of frame gap")
    p.add_argument("manifest", type=Path)
    p.add_argument("--max-gap", type=int, default=10)
    p.add_argument("--svg", action="store_true", help="also write a line chart")
    _loss_flags(p)

    p = add("alpha-sweep", "reprojection loss as a function of alpha")
    p.add_argument("manifest", type=Path)
    p.add_argument("--alphas", default="0,0.05,0.1,0.15,0.2,0.3,0.5,0.85,1")
    p.add_argument("--svg", action="store_true")
    _loss_flags(p)

    p = add("ulap-corr", "correlation of the ULAP prior with ground-truth depth")
    p.add_argument("manifest", type=Path)
    p.add_argument("--prior", choices=["ulap", "depth"], default="ulap")
    p.add_argument("--samples", type=int, default=2000, help="scatter points to dump")

    p = add("augment", "homomorphic-filter augmentation")
    p.add_argument("input", type=Path, nargs="?", help="input PNG")
    p.add_argument("output", type=Path, nargs="?", help="output PNG")
    p.add_argument("--manifest", type=Path, help="batch mode: filter every manifest image into --out")
    p.add_argument("--f0", default="random", help="cutoff frequency or 'random'")

    p = add("metrics", "depth metrics against ground truth")
    p.add_argument("pred_dir", type=Path)
    p.add_argument("manifest", type=Path)
    p.add_argument("--bg-mask-dir", type=Path)
    p.add_argument("--max-depth", type=float)
    return parser


def loss_config(args) -> LossConfig:
    cfg = LossConfig.from_file(args.config) if args.config else LossConfig()
    changes = {}
    if getattr(args, "alpha", None) is not None:
        changes["alpha"] = args.alpha
    if getattr(args, "lvw_window", None) is not None:
        changes["lvw_window"] = args.lvw_window
    if getattr(args, "corr_weight", None) is not None:
        changes["corr_weight"] = args.corr_weight
    if getattr(args, "no_lvw", False):
        changes["use_lvw"] = False
    if getattr(args, "no_min_composite", False):
        changes["use_min_composite"] = False
    return cfg.with_(**changes) if changes else cfg


def _out(args) -> Path:
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def run(args) -> int:
    jobs = args.jobs or 1
    seed = 0 if args.seed is None else args.seed

    if args.command == "synth":
        m = commands.cmd_synth(args.scene, _out(args), args.seed, jobs)
        print(f"wrote {len(m)} frames to {m.root}")
        return 0

    if args.command == "augment":
        f0 = commands.parse_f0(args.f0)
        if args.manifest:
            res = commands.cmd_augment_batch(SequenceManifest.load(args.manifest), _out(args), f0, seed, jobs)
            res.write_csv(_out(args) / "augment_log.csv")
            return 0
        if args.input is None or args.output is None:
            raise InputError("augment needs INPUT and OUTPUT, or --manifest")
        img, used = commands.augment_image(load_image(args.input), f0, seed)
        save_image(img, args.output)
        print(f"f0={used!r}")
        return 0

    manifest = SequenceManifest.load(args.manifest)

    if args.command == "loss":
        cfg = loss_config(args)
        res = commands.cmd_loss(manifest, args.frame, cfg, _out(args) if args.maps else None, args.depth)
        print(repr(res.total))
        return 0

    if args.command == "frame-gap":
        res = commands.cmd_frame_gap(manifest, args.max_gap, loss_config(args), jobs)
        res.write_csv(_out(args) / "frame_gap.csv")
        if args.svg:
            res.write_svg(_out(args) / "frame_gap.svg", "gap", "mean_loss")
        return 0

    if args.command == "alpha-sweep":
        try:
            alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
        except ValueError:
            raise InputError(f"bad --alphas list {args.alphas!r}") from None
        res = commands.cmd_alpha_sweep(manifest, alphas, loss_config(args), jobs)
        res.write_csv(_out(args) / "alpha_sweep.csv")
        if args.svg:
            res.write_svg(_out(args) / "alpha_sweep.svg", "alpha", "mean_loss")
        return 0

    if args.command == "ulap-corr":
        out = _out(args)
        res = commands.cmd_ulap_corr(manifest, args.prior, args.samples, seed, out / "ulap_scatter.csv")
        res.write_csv(out / "ulap_corr.csv")
        print(f"pooled pearson {res.rows[-1][1]:.4f}")
        return 0

    if args.command == "metrics":
        rows = commands.cmd_metrics(args.pred_dir, manifest, args.bg_mask_dir, args.max_depth)
        with open(_out(args) / "metrics.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# uwdepth metrics v{commands.CSV_SCHEMA_VERSION}\n")
            evalmetrics.write_csv(fh, rows)
        print(evalmetrics.format_table(rows), end="")
        return 0

    raise InputError(f"unknown command {args.command}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except DegenerateError as exc:
        log.error("%s", exc)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
