"""Command-line entry point: ``lapepi <subcommand> [flags]``.

Subcommands: ``synth``, ``analyze``, ``decompose``, ``train``,
``reconstruct`` and ``eval``.  Flags may also come from an INI file passed
with ``--config``; its ``[global]`` section and the section named after the
subcommand supply defaults that explicit flags override.

Exit codes: 0 on success, 1 on a domain error (one-line diagnostic on
stderr), 2 on a usage error.
"""

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import atomic_open, read_png, write_png
from .errors import LapEpiError

CKPT_ENV = "LAPEPI_CKPT_DIR"
DEFAULT_CKPT = "model.bin"


class UsageError(Exception):
    pass


def _ints(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text):
    vals = _ints(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {text!r}")
    return tuple(vals)


def default_checkpoint():
    """``$LAPEPI_CKPT_DIR/model.bin`` when the variable is set, else ``model.bin``."""
    base = os.environ.get(CKPT_ENV)
    return str(Path(base) / DEFAULT_CKPT) if base else DEFAULT_CKPT


def resolve_checkpoint(path):
    """Relative checkpoint paths that do not exist are looked up in ``$LAPEPI_CKPT_DIR``."""
    p = Path(path)
    base = os.environ.get(CKPT_ENV)
    if not p.exists() and not p.is_absolute() and base:
        return Path(base) / p
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="lapepi", description="Light-field angular densification toolkit.")
    parser.add_argument("--version", action="version", version=f"lapepi {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [global] and per-subcommand defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker threads (1 = deterministic serial run)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", parents=[common], help="render a synthetic EPI or light field")
    p.add_argument("--kind", choices=["toy", "random"], default="toy")
    p.add_argument("--out", required=True, help="PNG file (toy) or light-field directory (random)")
    p.add_argument("--dmax", type=float, default=9.0, help="toy: largest disparity after decimation")
    p.add_argument("--rate", type=int, default=3, help="toy: angular decimation rate")
    p.add_argument("--n-input", type=int, default=11, help="toy: input views after decimation")
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--views", type=int, default=7, help="random: views along s")
    p.add_argument("--views-t", type=int, default=1, help="random: views along t")
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--drange", type=_floats, default=[0.0, 3.0], help="random: disparity range per view")
    p.add_argument("--rgb", action="store_true")

    p = sub.add_parser("analyze", parents=[common], help="Fourier aliasing sweep over scales and betas")
    p.add_argument("--epi", required=True, help="dense EPI as a grayscale PNG")
    p.add_argument("--dmax", type=float, required=True, help="largest disparity of the decimated EPI (px/view)")
    p.add_argument("--rate", type=int, default=1, help="angular decimation applied before the analysis")
    p.add_argument("--scales", type=_ints, default=[1, 2, 4])
    p.add_argument("--betas", type=_floats, default=[10.0, 50.0, 100.0, 300.0])
    p.add_argument("--window", choices=["none", "hann"], default="none")
    p.add_argument("--out", default="alias_report.csv")

    p = sub.add_parser("decompose", parents=[common], help="LapEPI decomposition of an EPI")
    p.add_argument("--epi", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--alpha-s", type=int, default=2)
    p.add_argument("--kernels", type=_ints, default=[5, 13])
    p.add_argument("--out", required=True, help="output .npz with one array per level")

    p = sub.add_parser("train", parents=[common], help="train one stage")
    p.add_argument("--stage", choices=["pretrain", "finetune"], default="pretrain")
    p.add_argument("--source", default="bundled",
                   help="directory of grayscale PNGs, or 'bundled' for the packaged corpus")
    p.add_argument("--kind", choices=["natural_image", "epi"], default=None,
                   help="how to read --source (bundled: pretrain uses photographs, finetune synthetic EPIs)")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--batch", type=int, default=28)
    p.add_argument("--patch-in", type=_pair, default=(11, 44))
    p.add_argument("--strides", type=_pair, default=None)
    p.add_argument("--alpha", type=int, default=3)
    p.add_argument("--lr-conv", type=float, default=None)
    p.add_argument("--lr-deconv", type=float, default=None)
    p.add_argument("--init", choices=["gaussian", "scaled"], default="gaussian")
    p.add_argument("--lr-schedule", choices=["constant", "cosine"], default="constant")
    p.add_argument("--init-ckpt", default=None, help="starting parameters (required for finetune)")
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--ckpt", default=None, help=f"output checkpoint (default ${CKPT_ENV}/{DEFAULT_CKPT})")
    p.add_argument("--trace", default=None, help="loss trace CSV (default loss_trace.csv next to --ckpt)")

    p = sub.add_parser("reconstruct", parents=[common], help="densify a light field")
    p.add_argument("--lf", required=True, help="input light-field directory")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--alpha", type=int, default=3)
    p.add_argument("--mode", choices=["3d", "4d"], default="3d")
    p.add_argument("--policy", choices=["luma", "rgb"], default="luma")
    p.add_argument("--copy-inputs", action="store_true")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", parents=[common], help="PSNR/SSIM of a reconstruction against ground truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--alpha", type=int, default=3, help="input lattice spacing; its views are excluded")
    p.add_argument("--all-views", action="store_true", help="score every view, inputs included")
    p.add_argument("--out", default="report.csv")
    return parser


_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


def _apply_config(parser, argv):
    """Load ``--config`` (if any) into the chosen subcommand's defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cp = configparser.ConfigParser()
    if not cp.read(known.config):
        raise LapEpiError(f"config file not found: {known.config}")
    command = next((a for a in argv if a in COMMANDS), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = subparsers.choices.get(command)
    if sub is None:
        return
    actions = {a.dest: a for a in sub._actions}
    values = {}
    for section in ("global", command):
        if cp.has_section(section):
            values.update(cp.items(section))
    defaults = {}
    for key, raw in values.items():
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None:
            raise UsageError(f"unknown config key '{key}' for '{command}'")
        if isinstance(action, argparse._StoreTrueAction):
            if raw.lower() not in _BOOL:
                raise UsageError(f"config key '{key}' expects a boolean, got {raw!r}")
            defaults[dest] = _BOOL[raw.lower()]
        else:
            defaults[dest] = raw
    sub.set_defaults(**defaults)


def _print_config(args):
    print(f"lapepi {__version__}")
    items = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config: " + " ".join(f"{k}={_show(v)}" for k, v in items.items()))
    sys.stdout.flush()


def _show(v):
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


def _log(args, msg):
    if args.verbose:
        print(msg, file=sys.stderr)


# --- subcommands ----------------------------------------------------------

def cmd_synth(args):
    from .lightfield import save_lightfield
    from .synth import random_scene, synth_epi, synth_lightfield, toy_scene

    if args.kind == "toy":
        kw = {} if args.width is None else {"width": args.width}
        spec = toy_scene(args.dmax, args.rate, args.n_input, **kw)
        epi = synth_epi(spec)
        write_png(args.out, epi.data, bits=16)
        print(f"wrote toy EPI {epi.shape[0]}x{epi.shape[1]} to {args.out}")
        return 0
    rng = np.random.default_rng(args.seed)
    if len(args.drange) != 2:
        raise LapEpiError("--drange needs two values")
    spec = random_scene(rng, args.views, args.width or 128, d_range=tuple(args.drange), n_views_t=args.views_t,
                        height=args.height)
    if args.rgb:
        from dataclasses import replace

        spec = replace(spec, rgb=True)
    lf = synth_lightfield(spec)
    save_lightfield(lf, args.out)
    print(f"wrote {lf.n_t}x{lf.n_s} light field ({lf.n_v}x{lf.n_u}) to {args.out}")
    return 0


def cmd_analyze(args):
    from .fourier import sweep

    epi = read_png(args.epi, mode="L")
    report = sweep(epi, args.scales, args.betas, args.rate, args.dmax,
                   window=None if args.window == "none" else args.window)
    report.to_csv(args.out)
    print(f"wrote {len(report.rows)} rows to {args.out}")
    return 0


def cmd_decompose(args):
    from .pyramid import PyramidConfig, build_lapepi, collapse, pad_width

    cfg = PyramidConfig(args.levels, args.alpha_s, tuple(args.kernels))
    data = read_png(args.epi, mode="L")
    padded, pads = pad_width(data, cfg.width_multiple)
    pyr = build_lapepi(padded, cfg)
    arrays = {"level1": pyr.level1, "pads": np.array(pads)}
    for p, (r, rb) in enumerate(pyr.residuals, start=2):
        arrays[f"residual{p}"] = r
        arrays[f"blurred{p}"] = rb
    with atomic_open(args.out, "wb") as fh:
        np.savez(fh, **arrays)
    err = float(np.max(np.abs(collapse(pyr).data - padded)))
    print(f"wrote {cfg.P} levels to {args.out}; collapse max-abs error {err:.3g}")
    return 0


def _train_sources(args):
    from .corpus import bundled_epis, bundled_images
    from .train import SampleSource

    if args.source == "bundled":
        kind = args.kind or ("natural_image" if args.stage == "pretrain" else "epi")
        arrays = bundled_images() if kind == "natural_image" else bundled_epis()
        return SampleSource(kind, arrays)
    root = Path(args.source)
    files = sorted(root.glob("*.png"))
    if not files:
        raise LapEpiError(f"no PNG files in {root}")
    return SampleSource(args.kind or "natural_image", [read_png(f, mode="L") for f in files])


def cmd_train(args):
    from .checkpoint import load_checkpoint
    from .train import TrainConfig, extract_patch_pairs, run_stage

    cfg = TrainConfig(stage=args.stage, patch_in=args.patch_in, alpha_a=args.alpha, batch=args.batch,
                      strides=args.strides, lr_conv=args.lr_conv, lr_deconv=args.lr_deconv, max_steps=args.steps,
                      seed=args.seed, checkpoint_every=args.checkpoint_every, init=args.init,
                      lr_schedule=args.lr_schedule)
    pairs = extract_patch_pairs(_train_sources(args), cfg)
    print(f"{len(pairs)} patch pairs ({pairs.skipped} sources skipped)")
    if len(pairs) == 0:
        raise LapEpiError("no source is large enough for one label window")
    init = load_checkpoint(resolve_checkpoint(args.init_ckpt)) if args.init_ckpt else None
    ckpt = Path(args.ckpt or default_checkpoint())
    trace = Path(args.trace) if args.trace else ckpt.with_name("loss_trace.csv")
    result = run_stage(pairs, cfg, init, ckpt, log=(lambda m: _log(args, m)))
    result.trace_csv(trace)
    final = result.trace[-1][1] if result.trace else float("nan")
    print(f"trained {cfg.max_steps} steps in {result.seconds:.1f} s; final loss {final:.6g}")
    print(f"wrote {ckpt} and {trace}")
    return 0


def cmd_reconstruct(args):
    from .checkpoint import load_checkpoint
    from .lightfield import load_lightfield, save_lightfield
    from .reconstruct import ReconConfig, reconstruct_lf3d, reconstruct_lf4d

    params = load_checkpoint(resolve_checkpoint(args.ckpt or default_checkpoint()))
    cfg = ReconConfig(args.alpha, params.pyramid, args.policy, args.copy_inputs, args.threads)
    lf = load_lightfield(args.lf)
    if args.mode == "3d":
        if lf.n_t != 1:
            raise LapEpiError(f"3d mode needs a single camera row, got {lf.n_t} rows (use --mode 4d)")
        out = reconstruct_lf3d(lf, params, cfg)
    else:
        out = reconstruct_lf4d(lf, params, cfg)
    save_lightfield(out, args.out)
    print(f"reconstructed {lf.n_t}x{lf.n_s} -> {out.n_t}x{out.n_s} views into {args.out}")
    return 0


def cmd_eval(args):
    from .lightfield import load_lightfield
    from .metrics import evaluate, synthesized_mask

    recon = load_lightfield(args.recon)
    truth = load_lightfield(args.truth)
    mask = None if args.all_views else synthesized_mask(recon.n_t, recon.n_s, args.alpha)
    report = evaluate(recon, truth, mask, metadata={"recon": args.recon, "alpha_a": args.alpha})
    report.to_csv(args.out)
    print(report.summary())
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "decompose": cmd_decompose,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "eval": cmd_eval,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lapepi: error: {exc}", file=sys.stderr)
        return 2
    except LapEpiError as exc:
        print(f"lapepi: error: {exc}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("lapepi: error: a subcommand is required", file=sys.stderr)
        return 2
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        print("lapepi: error: --threads must be >= 1", file=sys.stderr)
        return 2
    _print_config(args)
    try:
        return COMMANDS[args.command](args)
    except (LapEpiError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"lapepi: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
