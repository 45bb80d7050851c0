"""Command-line entry point: ``wvae {gen-data,train,whiten,score,traverse}``.

Every command writes its outputs plus ``manifest.json`` (the fully resolved
configuration) into ``--out``. Options may also come from a ``--config``
file of ``key = value`` lines; command-line flags win.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from wvae import __version__
from wvae.idx import encode_images, read_idx
from wvae.metric import (
    MetricConfig,
    evaluate,
    identity_oracle,
    mean_encoder,
    sampled_encoder,
    write_votes,
)
from wvae.objectives import TrainConfig, train
from wvae.persistence import (
    load_checkpoint,
    load_transform,
    save_checkpoint,
    save_transform,
    write_curves,
    write_spectrum,
)
from wvae.render import traversal_grid, write_pgm
from wvae.shapes import FACTOR_NAMES, FactorSpace, ShapesDataset, enumerate_dataset
from wvae.whitening import fit_whitening, spectrum, whiten

log = logging.getLogger("wvae")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _range(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in str(text).split(","))
    return lo, hi


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--config", type=Path, help="file of key = value lines")


def _add_dataset(p: argparse.ArgumentParser) -> None:
    p.add_argument("--counts", type=_int_list, default=list(FactorSpace().counts),
                   help="values per factor: shape,scale,orientation,pos_x,pos_y")
    p.add_argument("--idx-images", type=Path, help="train on an IDX image file instead of shapes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wvae", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="render the shapes dataset to IDX + label CSV")
    _add_common(p)
    _add_dataset(p)

    p = sub.add_parser("train", help="train a VAE, beta-VAE or Factor-VAE")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--objective", choices=["vae", "beta_vae", "factor_vae"], default="vae")
    p.add_argument("--beta", type=float, default=4.0)
    p.add_argument("--gamma", type=float, default=6.4)
    p.add_argument("--latent-dim", type=int, default=10)
    p.add_argument("--hidden", type=_int_list, default=[1024, 512])
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--limit", type=int, help="train on the first N images only")

    p = sub.add_parser("whiten", help="fit PCA whitening on the encoded training set")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--checkpoint", type=Path)

    p = sub.add_parser("score", help="majority-vote disentanglement score")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--transform", type=Path)
    p.add_argument("--encoder", choices=["model", "identity-oracle"], default="model")
    p.add_argument("--sampled", action="store_true", help="use z samples instead of posterior means")
    p.add_argument("--L", type=int, default=64)
    p.add_argument("--m-train", type=int, default=500)
    p.add_argument("--m-test", type=int, default=500)
    p.add_argument("--collapse-threshold", type=float, default=0.05)

    p = sub.add_parser("traverse", help="render a latent traversal grid as PGM")
    _add_common(p)
    _add_dataset(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--transform", type=Path)
    p.add_argument("--image-index", type=int, default=0)
    p.add_argument("--dims", type=_int_list, help="latent dims to sweep (default: all)")
    p.add_argument("--range", dest="value_range", type=_range, default=(-2.0, 2.0), help="lo,hi")
    p.add_argument("--steps", type=int, default=7)
    return parser


def read_config_file(path: Path) -> dict[str, str]:
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = read_config_file(args.config)
    except OSError as e:
        parser.error(f"cannot read config: {e}")
    except UsageError as e:
        parser.error(str(e))
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        if key == "value_range" or key == "range":
            key = "value_range"
        action = known.get(key)
        if action is None or key in ("out", "config", "help"):
            parser.error(f"unknown config key {key!r} for {args.command}")
        if action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes")
        else:
            defaults[key] = action.type(value) if action.type else value
    sub.set_defaults(**defaults)
    # reparse so explicit flags override file values
    return parser.parse_args(argv)


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def write_manifest(out: Path, args: argparse.Namespace, extra: dict | None = None) -> None:
    resolved = {k: _jsonable(v) for k, v in sorted(vars(args).items())}
    manifest = {"version": __version__, "config": resolved}
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _space(args) -> FactorSpace:
    if len(args.counts) != 5:
        raise UsageError("--counts needs five values")
    return FactorSpace(*args.counts)


def _training_images(args) -> np.ndarray:
    if args.idx_images is not None:
        return read_idx(args.idx_images)
    images, _ = enumerate_dataset(_space(args))
    return images


def cmd_gen_data(args) -> dict:
    images, factors = enumerate_dataset(_space(args))
    (args.out / "images.idx").write_bytes(encode_images(images))
    with open(args.out / "factors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", *FACTOR_NAMES])
        for i, f in enumerate(factors):
            w.writerow([i, *f.tolist()])
    return {"count": len(images)}


def cmd_train(args) -> dict:
    images = _training_images(args)
    if args.limit is not None:
        images = images[: args.limit]
    config = TrainConfig(
        objective=args.objective,
        beta=args.beta,
        gamma=args.gamma,
        latent_dim=args.latent_dim,
        hidden=tuple(args.hidden),
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        lr=args.lr,
    )
    result = train(images, config, progress=True)
    save_checkpoint(args.out / "checkpoint.llab", result.model)
    if result.curves:
        write_curves(result.curves, args.out / "curves.csv")
    return {"train_config": config.to_dict(), "images": len(images)}


def _checkpoint(args):
    if args.checkpoint is None:
        raise UsageError("--checkpoint is required")
    return load_checkpoint(args.checkpoint)


def cmd_whiten(args) -> dict:
    model = _checkpoint(args)
    images = _training_images(args)
    T = fit_whitening(model.encode_mean(images.reshape(len(images), -1)))
    save_transform(args.out / "transform.lwht", T)
    write_spectrum(spectrum(T), args.out / "spectrum.csv")
    return {"degenerate_dims": int(T.degenerate.sum())}


def cmd_score(args) -> dict:
    if args.idx_images is not None:
        raise UsageError("score needs the procedural shapes dataset (factor labels)")
    dataset = ShapesDataset(_space(args))
    if args.encoder == "identity-oracle":
        encoder = identity_oracle
    else:
        if args.checkpoint is None:
            raise UsageError("--checkpoint is required unless --encoder identity-oracle")
        model = load_checkpoint(args.checkpoint)
        transform = load_transform(args.transform) if args.transform else None
        if args.sampled:
            encoder = sampled_encoder(model, np.random.default_rng(args.seed), transform)
        else:
            encoder = mean_encoder(model, transform)
    config = MetricConfig(args.L, args.m_train, args.m_test, args.collapse_threshold, args.seed)
    result = evaluate(dataset, encoder, config)
    write_votes(result.votes_train, args.out / "votes_train.csv")
    write_votes(result.votes_test, args.out / "votes_test.csv")
    summary = {"score": result.score, "M_train": args.m_train, "M_test": args.m_test}
    (args.out / "score.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"score {result.score:.4f}")
    return summary


def cmd_traverse(args) -> dict:
    model = _checkpoint(args)
    transform = load_transform(args.transform) if args.transform else None
    images = _training_images(args)
    if not 0 <= args.image_index < len(images):
        raise UsageError(f"--image-index must be in [0, {len(images)})")
    image = np.asarray(images[args.image_index], dtype=np.float64)
    if image.max() > 1:
        image = image / 255.0
    z = model.encode_mean(image.reshape(1, -1))[0]
    if transform is not None:
        z = whiten(z, transform)
    dims = args.dims if args.dims is not None else list(range(model.latent_dim))
    grid = traversal_grid(
        model.decode_probs,
        z,
        dims,
        args.value_range,
        args.steps,
        transform=transform,
        anchor=image,
        image_shape=image.shape,
    )
    write_pgm(grid, args.out / "traversal.pgm")
    return {"grid_shape": list(grid.shape)}


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "whiten": cmd_whiten,
    "score": cmd_score,
    "traverse": cmd_traverse,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        extra = COMMANDS[args.command](args)
        write_manifest(args.out, args, extra)
    except UsageError as e:
        print(f"wvae: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"wvae: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
