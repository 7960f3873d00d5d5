"""Command-line entry point.

Machine-readable JSON goes to stdout; progress and error text go to stderr.
Exit codes: 0 success, 2 usage or validation, 3 I/O, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import (
    FormatError,
    NumericalError,
    RealImage,
    ValidationError,
    load_image,
    load_radar_config,
    save_image,
    save_psc_set,
)
from .forward_model import build_dictionary
from .phy_losses import PhyLossWeights, loss_phy_s
from .metrics import compute_report, report_to_dict
from .simulator import gen_dataset, load_dataset, sim_config_from_dict
from .unrolled import (
    EstimatorParams,
    StageParams,
    estimate_psc,
    estimator_forward,
    load_estimator_params,
    loss_psc,
    save_estimator_params,
    train_config_from_dict,
    train_estimator,
)

__all__ = ["main"]


def _progress(message):
    print(message, file=sys.stderr)


def _emit(doc):
    print(json.dumps(doc))


def _thread_cap():
    raw = os.environ.get("PSC_KIT_THREADS")
    if raw is None:
        return None
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(f"PSC_KIT_THREADS must be a positive integer, got {raw!r}")
    if cap < 1:
        raise ValidationError(f"PSC_KIT_THREADS must be a positive integer, got {raw!r}")
    return cap


def _load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _load_real_image(path):
    image = load_image(path)
    if not isinstance(image, RealImage):
        raise ValidationError(f"{path}: expected a real magnitude image")
    return image


def cmd_simulate(args):
    config = sim_config_from_dict(_load_json(args.config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    samples, _ = gen_dataset(config, args.out, threads=_thread_cap())
    _progress(f"wrote {len(samples)} samples to {args.out}")
    _emit({"num_samples": len(samples), "out_dir": str(args.out)})
    return 0


def _estimator_params_for(args):
    if args.params is not None:
        return load_estimator_params(args.params)
    stage = StageParams(t=args.t, rho=args.rho, mu=args.mu)
    return EstimatorParams(stages=(stage,) * args.iters,
                           lambda1=100.0, lambda2=200.0)


def cmd_estimate(args):
    radar = load_radar_config(args.radar)
    image = _load_real_image(args.image)
    if (image.height, image.width) != (radar.grid_h, radar.grid_w):
        raise ValidationError(
            f"image grid {image.height}x{image.width} does not match "
            f"radar grid {radar.grid_h}x{radar.grid_w}")
    params = _estimator_params_for(args)
    dic = build_dictionary(radar)

    _, _, trace = estimator_forward(dic, image.data, params,
                                    proximal_mode=args.proximal)
    pscs, recon = estimate_psc(dic, image, params, proximal_mode=args.proximal)
    norm = float(np.linalg.norm(image.data))
    relative = trace[-1] / norm if norm > 0.0 else 0.0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_psc_set(pscs, out / "centers.json")
    save_image(recon, out / "recon.psci")
    rows = ["iter,residual"]
    rows += [f"{k + 1},{value!r}" for k, value in enumerate(trace)]
    (out / "residual.csv").write_text("\n".join(rows) + "\n")

    _progress(f"estimated {len(pscs.centers)} centers, "
              f"relative residual {relative:.6g}")
    _emit({"relative_residual": relative, "num_centers": len(pscs.centers),
           "out_dir": str(out)})
    return 0


def cmd_train(args):
    samples, sim_config = load_dataset(args.manifest)
    config = train_config_from_dict(_load_json(args.train_config))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    dic = build_dictionary(sim_config.radar)
    dataset = [s.image.data for s in samples]

    params, history = train_estimator(dic, dataset, config)
    if history:
        initial, final = history[0][1], history[-1][1]
    else:
        losses = []
        for r in dataset:
            o, p, _ = estimator_forward(dic, r, params,
                                        proximal_mode=config.proximal_mode)
            losses.append(loss_psc(dic, r, o, p, config.lambda1, config.lambda2))
        initial = final = float(np.mean(losses))

    out = Path(args.out)
    save_estimator_params(params, out)
    csv_path = Path(args.loss_csv) if args.loss_csv else \
        out.with_name(out.stem + "_loss.csv")
    rows = ["step,loss"] + [f"{step},{value!r}" for step, value in history]
    csv_path.write_text("\n".join(rows) + "\n")

    _progress(f"trained {config.num_stages} stages for {config.steps} steps")
    _emit({"initial_loss": initial, "final_loss": final,
           "params": str(out), "loss_csv": str(csv_path)})
    return 0


def cmd_eval(args):
    ref = _load_real_image(args.ref)
    test = _load_real_image(args.test)
    report = compute_report(ref, test, dynamic_range=args.range)
    _emit(report_to_dict(report))
    return 0


def cmd_losses(args):
    weights = PhyLossWeights(alpha=args.alpha, beta=args.beta, gamma=args.gamma)
    real = _load_real_image(args.real_recon)
    fake = _load_real_image(args.fake_recon)
    phy_s = loss_phy_s(real, fake)
    _emit({"phy_s": phy_s, "phy_g_image_term": weights.beta * phy_s,
           "alpha": weights.alpha, "beta": weights.beta, "gamma": weights.gamma})
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="psckit",
        description="Scattering-center estimation toolkit: simulate datasets, "
                    "run classical or unrolled sparse solvers, train stage "
                    "parameters, and score reconstructions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True, help="SimConfig JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate scattering centers from an image")
    p.add_argument("--image", required=True, help="input image (.psci)")
    p.add_argument("--radar", required=True, help="RadarConfig JSON file")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--params", default=None,
                      help="EstimatorParams JSON from training")
    mode.add_argument("--classical", action="store_true",
                      help="fixed-parameter solver (see --t/--rho/--mu/--iters)")
    p.add_argument("--t", type=float, default=1e-3, help="gradient step size")
    p.add_argument("--rho", type=float, default=5e-3, help="threshold level")
    p.add_argument("--mu", type=float, default=1e-3, help="data-update weight")
    p.add_argument("--iters", type=int, default=50, help="classical iteration count")
    p.add_argument("--proximal", action="store_true",
                   help="use the proximal-gradient p update")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="train unrolled stage parameters")
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--train-config", required=True, help="TrainConfig JSON file")
    p.add_argument("--out", required=True, help="output EstimatorParams JSON path")
    p.add_argument("--loss-csv", default=None,
                   help="loss history CSV path (default: <out>_loss.csv)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="image quality metrics for an image pair")
    p.add_argument("--ref", required=True, help="reference image (.psci)")
    p.add_argument("--test", required=True, help="test image (.psci)")
    p.add_argument("--range", type=float, default=None,
                   help="dynamic range (default: joint maximum)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("losses", help="image-level physics loss terms")
    p.add_argument("--real-recon", required=True, help="reconstruction of the real image")
    p.add_argument("--fake-recon", required=True, help="reconstruction of the generated image")
    p.add_argument("--alpha", type=float, default=0.6, help="score mixing weight")
    p.add_argument("--beta", type=float, default=1.0, help="image term weight")
    p.add_argument("--gamma", type=float, default=10.0, help="feature term weight")
    p.set_defaults(func=cmd_losses)

    return parser


def main(argv=None):
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: missing field {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
