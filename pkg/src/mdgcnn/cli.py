"""Command line interface.

Exit codes: 0 success, 2 mesh error or bad command line, 3 too many invalid
window points, 4 shape, config or container mismatch, 5 failed verification,
1 any other library error (for example a diverging loss).
"""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import conv
from .errors import ConfigInvalid, ContainerError, MdgcnnError, MeshError, ShapeMismatch, TooManyInvalid

logger = logging.getLogger("mdgcnn")

EXIT_MESH, EXIT_INVALID, EXIT_SHAPE, EXIT_VERIFY = 2, 3, 4, 5


def _label_colors(labels):
    """Distinct RGB per label (golden-ratio hue walk, full saturation)."""
    import colorsys

    labels = np.asarray(labels)
    hues = (np.arange(labels.max() + 1) * 0.618033988749895) % 1.0
    table = np.array([colorsys.hsv_to_rgb(h, 0.85, 0.95) for h in hues])
    return (255 * table[labels]).round().astype(np.uint8)


def _ramp_colors(values):
    v = np.asarray(values, dtype=float)
    span = v.max() - v.min()
    t = (v - v.min()) / span if span > 0 else np.zeros_like(v)
    return (255 * np.stack([t, 0.2 + 0.6 * t * (1 - t), 1 - t], axis=1)).round().astype(np.uint8)


def _usage(msg):
    print(f"invalid arguments: {msg}", file=sys.stderr)
    return EXIT_MESH


def cmd_precompute(args):
    from .container import save_pyramid
    from .mesh import load_mesh
    from .pyramid import build_pyramid
    from .windows import WindowSpec

    try:
        spec = WindowSpec(args.nrho, args.ntheta, args.radius)
    except ValueError as exc:
        return _usage(exc)
    if args.rmax is not None and args.rmax < args.radius:
        return _usage(f"--rmax {args.rmax} is smaller than --radius {args.radius}")
    if args.levels < 0 or args.threads < 1:
        return _usage("--levels must be >= 0 and --threads >= 1")
    mesh = load_mesh(args.mesh)
    pyr = build_pyramid(mesh, spec, levels=args.levels, eps=args.eps, r_max=args.rmax, workers=args.threads)
    save_pyramid(args.out, pyr)
    print(f"wrote {args.out}: levels {[m.n_vertices for m in pyr.meshes]} vertices, "
          f"valid window points {[round(float(t.valid.mean()), 4) for t in pyr.tensors]}")
    return 0


def _load_data(path):
    with np.load(path) as d:
        if "x" not in d or "y" not in d:
            raise ShapeMismatch(f"{path} must hold arrays 'x' and 'y'")
        return d["x"], d["y"]


def cmd_train(args):
    from .container import load_pyramid, save_checkpoint
    from .network import ArchConfig, build, train

    pyr, header = load_pyramid(args.pre)
    cfg = ArchConfig.load(args.arch) if args.arch else ArchConfig()
    cfg.model = args.model
    x, y = _load_data(args.data)
    if x.ndim == 2:
        x = x[..., None]
    cfg.in_channels = x.shape[-1]
    cfg.n_classes = max(cfg.n_classes, int(y.max()) + 1)
    graph = build(cfg.validate(), pyr)
    n_test = int(round(args.test_fraction * len(x)))
    n_train = len(x) - n_test
    dtype = np.float32 if args.float32 else np.float64
    log = args.log or str(Path(args.out).with_suffix(".csv"))
    params, hist = train(graph, x[:n_train], y[:n_train], epochs=args.epochs, batch=args.batch, seed=args.seed,
                         dtype=dtype, x_test=x[n_train:] if n_test else None,
                         y_test=y[n_train:] if n_test else None, log_path=log)
    save_checkpoint(args.out, params, cfg.to_dict(), header["mesh_hash"],
                    extra={"seed": args.seed, "epochs": args.epochs})
    if hist:
        print(" ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in hist[-1].items()))
    print(f"wrote {args.out} and {log}")
    return 0


def cmd_predict(args):
    from .container import load_checkpoint, load_pyramid
    from .mesh import write_ply
    from .network import ArchConfig, build, predict

    pyr, header = load_pyramid(args.pre)
    params, ck = load_checkpoint(args.model)
    if ck["mesh_hash"] != header["mesh_hash"]:
        raise ContainerError("checkpoint was trained on a different mesh")
    cfg = ArchConfig.from_dict(ck["config"])
    graph = build(cfg, pyr)
    graph.check_params(params)
    f = conv.load_signal_csv(args.signal)
    if f.shape != graph.input_shape:
        raise ShapeMismatch(f"signal has shape {f.shape}, model expects {graph.input_shape}")
    probs = predict(graph, params, f[None].astype(next(iter(params.values())).dtype))[0]
    nv = pyr.meshes[0].n_vertices
    if probs.ndim == 1:  # one label for the whole shape
        probs = np.broadcast_to(probs, (nv, probs.size))
    labels = np.argmax(probs, axis=1)
    out = Path(args.out)
    if out.suffix.lower() == ".ply":
        write_ply(out, pyr.meshes[0], _label_colors(labels))
    else:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex", "label"] + [f"p{c}" for c in range(probs.shape[1])])
            for v in range(nv):
                w.writerow([v, labels[v]] + [f"{p:.8g}" for p in probs[v]])
    print(f"wrote {out}")
    return 0


def cmd_demo_dirac(args):
    from .container import load_pyramid
    from .dirac import annulus_mass_fraction, propagate
    from .gpc import compute_gpc
    from .mesh import write_ply

    if args.n < 1:
        print("--n must be >= 1", file=sys.stderr)
        return EXIT_SHAPE
    pyr, _ = load_pyramid(args.pre)
    mesh, T = pyr.meshes[0], pyr.tensors[0]
    if not 0 <= args.source < mesh.n_vertices:
        raise ShapeMismatch(f"source {args.source} not a vertex of the {mesh.n_vertices}-vertex mesh")
    resp = propagate(T, args.source, args.t, args.n, args.mode)
    reach = args.n * args.t + T.spec.radius
    radius = compute_gpc(mesh, args.source, reach).dense("r")
    out = Path(args.out)
    write_ply(out.with_suffix(".ply"), mesh, _ramp_colors(resp))
    with open(out.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "radius", "response"])
        for v in np.flatnonzero(np.isfinite(radius)):
            w.writerow([v, f"{radius[v]:.10g}", f"{resp[v]:.10g}"])
    half = T.spec.radius / (T.spec.n_rho + 1)
    frac = annulus_mass_fraction(mesh, resp, np.where(np.isfinite(radius), radius, np.inf), args.n * args.t, half)
    print(f"mode={args.mode} n={args.n} t={args.t}: {100 * frac:.1f}% of the response mass within "
          f"{args.n * args.t:.4g} +- {half:.4g}")
    print(f"wrote {out.with_suffix('.ply')} and {out.with_suffix('.csv')}")
    return 0


def cmd_verify(args):
    from .audit import audit
    from .container import load_pyramid

    pyr, _ = load_pyramid(args.pre)
    checks = audit(pyr, seed=args.seed)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.detail})")
    return 0 if all(c.passed for c in checks) else EXIT_VERIFY


def cmd_synth(args):
    from .container import load_pyramid
    from .synthetic import oriented_texture_dataset

    pyr, _ = load_pyramid(args.pre)
    x, y = oriented_texture_dataset(pyr.meshes[0], args.samples, seed=args.seed)
    np.savez(args.out, x=x, y=y)
    print(f"wrote {args.out}: {len(x)} samples")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mdgcnn", description="Directional geodesic convolution on meshes.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("precompute", help="geodesic charts and pooling maps into a container")
    s.add_argument("--mesh", required=True)
    s.add_argument("--nrho", type=int, required=True)
    s.add_argument("--ntheta", type=int, required=True)
    s.add_argument("--radius", type=float, required=True)
    s.add_argument("--levels", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--eps", type=float, default=1e-12)
    s.add_argument("--rmax", type=float, default=None, help="GPC cutoff at level 0 (default from mesh and radius)")
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_precompute)

    s = sub.add_parser("train", help="train a network on a dataset (.npz with x, y)")
    s.add_argument("--pre", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--arch", default=None, help="JSON or key=value architecture file")
    s.add_argument("--model", choices=("mdgcnn", "gcnn"), default="mdgcnn")
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--batch", type=int, default=10)
    s.add_argument("--test-fraction", type=float, default=0.2)
    s.add_argument("--float32", action="store_true")
    s.add_argument("--log", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="per-vertex labels for one signal")
    s.add_argument("--pre", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--signal", required=True)
    s.add_argument("--out", required=True, help=".ply for colored labels, anything else for CSV")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("demo-dirac", help="propagate a point source with a shifted Dirac kernel")
    s.add_argument("--pre", required=True)
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--mode", choices=("dir", "geo"), default="dir")
    s.add_argument("--source", type=int, default=0)
    s.add_argument("--out", required=True, help="output stem; writes .ply and .csv")
    s.set_defaults(func=cmd_demo_dirac)

    s = sub.add_parser("verify", help="audit a container")
    s.add_argument("--pre", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("synth", help="oriented-texture dataset on the container mesh")
    s.add_argument("--pre", required=True)
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except MeshError as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_MESH if args.command == "precompute" else EXIT_SHAPE
    except TooManyInvalid as exc:
        print(f"too many invalid window points: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ShapeMismatch, ConfigInvalid, ContainerError) as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except MdgcnnError as exc:  # e.g. diverging training
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
