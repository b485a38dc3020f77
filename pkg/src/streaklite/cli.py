"""Command-line front end: simulate, train, detect, sweep, bench, analyze.

Every command resolves its settings from an optional flat key=value config
file plus command-line flags (flags win), and writes the resolved
configuration next to its outputs so any run can be reproduced
bit-identically. Randomized commands require an explicit seed; there are no
wall-clock defaults.

Exit codes: 0 success, 2 bad configuration, 3 I/O failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, baseline, classifier, detector, growth, metrics, simulate, sweeps
from .image import NoiseParams, PgmFormatError, background_stats, load_pgm, save_mask, save_pgm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTERNAL = 4


class ConfigError(Exception):
    """Bad configuration file or flag combination."""


def _parse_config_file(path: Path) -> dict[str, str]:
    values = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, raw: dict[str, str]) -> None:
    """Apply config values as parser defaults; unknown keys are rejected."""
    known = {}
    types = {}
    for action in parser._actions:
        if action.dest not in ("help", "config"):
            known[action.dest] = action
            types[action.dest] = action.type
    defaults = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"unknown config key {key!r}")
        action = known[dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if value.lower() not in ("true", "false", "0", "1"):
                raise ConfigError(f"config key {key!r} expects a boolean, got {value!r}")
            defaults[dest] = value.lower() in ("true", "1")
        elif types[dest] is not None:
            try:
                defaults[dest] = types[dest](value)
            except ValueError as e:
                raise ConfigError(f"config key {key!r}: {e}") from e
        else:
            defaults[dest] = value
    parser.set_defaults(**defaults)


def _resolved_config(args: argparse.Namespace) -> dict:
    skip = {"func", "config", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _config_hash(resolved: dict) -> str:
    text = "\n".join(f"{k}={v}" for k, v in resolved.items())
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _stamp(resolved: dict) -> str:
    return f"streaklite {__version__} config_hash={_config_hash(resolved)}"


def _write_run_config(out_dir: Path, resolved: dict, command: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"# streaklite {__version__}", f"# command={command}"]
    lines += [f"{k}={v}" for k, v in resolved.items()]
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require_seed(args) -> int:
    if args.seed is None:
        raise ConfigError("an explicit --seed (or a seed= config entry) is required")
    return args.seed


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    seed = _require_seed(args)
    out_dir = Path(args.out_dir)
    resolved = _resolved_config(args)
    _write_run_config(out_dir, resolved, args.command)

    config = simulate.DatasetConfig(
        noise=NoiseParams(args.noise_mu, args.noise_sigma, seed),
        psnr=args.psnr,
        angle_range=(args.angle_min, args.angle_max),
        length_range=(args.length_min, args.length_max),
        frame_size=(args.width, args.height),
        mask_threshold=args.mask_threshold,
        psf_sigma=args.psf_sigma,
    )
    samples, rows = simulate.generate_dataset(args.frames, config, seed)

    manifest_path = out_dir / "manifest.csv"
    with open(manifest_path, "w", encoding="ascii") as fh:
        fh.write(f"# {_stamp(resolved)}\n")
        fh.write("frame,frame_file,mask_file,sub_seed,angle_deg,length,intensity,psnr\n")
        for i, sample in enumerate(samples):
            frame_file = f"frame_{i:04d}.pgm"
            mask_file = f"mask_{i:04d}.pgm"
            save_pgm(sample.frame, out_dir / frame_file)
            save_mask(sample.ideal_mask, out_dir / mask_file)
            fh.write(
                f"{i},{frame_file},{mask_file},{simulate.subseed(seed, i)},"
                f"{sample.streak.angle:.6f},{sample.streak.length:.6f},"
                f"{sample.streak.intensity:.6f},{sample.psnr:.4f}\n"
            )
    if args.dataset:
        simulate.save_rows_csv(rows, out_dir / args.dataset, comment=_stamp(resolved))
    print(f"wrote {len(samples)} frames, {len(rows)} dataset rows to {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    seed = _require_seed(args)
    out_dir = Path(args.out_dir)
    resolved = _resolved_config(args)

    dataset_path = Path(args.dataset)
    if not dataset_path.exists():
        raise FileNotFoundError(f"dataset file not found: {dataset_path}")
    rows = simulate.load_rows_csv(dataset_path)

    config = classifier.TrainConfig(c=args.c, epochs=args.epochs, batch_size=args.batch_size, seed=seed)
    accuracies, mean = classifier.kfold_validate(rows.x, rows.y, k=args.folds, config=config)
    model = classifier.train(rows.x, rows.y, config)

    _write_run_config(out_dir, resolved, args.command)
    classifier.save_model(model, out_dir / args.model)
    with open(out_dir / "fold_report.csv", "w", encoding="ascii") as fh:
        fh.write(f"# {_stamp(resolved)}\n")
        fh.write("fold,accuracy\n")
        for i, acc in enumerate(accuracies, 1):
            fh.write(f"{i},{acc:.6f}\n")
        fh.write(f"mean,{mean:.6f}\n")
    if args.heatmap:
        classifier.save_weight_heatmap_csv(model, out_dir / args.heatmap)
    print(f"fold accuracies: {['%.4f' % a for a in accuracies]}, mean {mean:.4f}")
    print(f"model written to {out_dir / args.model}")
    return EXIT_OK


def cmd_detect(args) -> int:
    out_dir = Path(args.out_dir)
    resolved = _resolved_config(args)

    frame = load_pgm(args.frame)
    model = classifier.load_model(args.model)
    components = detector.crude_classify(frame, model, args.t_h)

    _write_run_config(out_dir, resolved, args.command)
    mask = np.zeros(frame.shape, dtype=bool)
    if args.no_growth:
        for comp in components:
            mask |= comp.mask(frame.shape)
        detector.save_components_csv(components, out_dir / "components.csv", comment=_stamp(resolved))
        n = len(components)
    else:
        config = growth.GrowthConfig(l_max=args.l_max)
        results = growth.refine(frame, components, config=config)
        for r in results:
            mask |= r.component.mask(frame.shape)
        growth.save_results_csv(results, out_dir / "components.csv", comment=_stamp(resolved))
        n = len(results)
    save_mask(mask, out_dir / "detections.pgm")
    print(f"{n} detection(s); outputs in {out_dir}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    seed = _require_seed(args)
    out_dir = Path(args.out_dir)
    resolved = _resolved_config(args)

    model = classifier.load_model(args.model)
    config = sweeps.SweepConfig(
        noise=NoiseParams(args.noise_mu, args.noise_sigma, seed),
        psnr=args.psnr,
        length=args.length,
        frame_size=(args.width, args.height),
        t_h=args.t_h,
    )
    methods = tuple(args.methods.split(","))
    rows = sweeps.run_sweep(
        args.kind,
        _float_list(args.grid),
        model,
        trials=args.trials,
        methods=methods,
        config=config,
        seed=seed,
        workers=args.threads,
    )
    _write_run_config(out_dir, resolved, args.command)
    metrics.save_metrics_csv(rows, out_dir / "sweep.csv", comment=_stamp(resolved))
    print(f"{len(rows)} metric rows written to {out_dir / 'sweep.csv'}")
    return EXIT_OK


def cmd_bench(args) -> int:
    seed = _require_seed(args)
    out_dir = Path(args.out_dir)
    resolved = _resolved_config(args)

    model = classifier.load_model(args.model)
    methods = tuple(args.methods.split(","))
    timings = sweeps.benchmark(
        model,
        methods=methods,
        frame_size=(args.width, args.height),
        repetitions=args.repetitions,
        seed=seed,
    )
    _write_run_config(out_dir, resolved, args.command)
    lines = [f"# {_stamp(resolved)}", "method,mean_seconds"]
    report = []
    for method in methods:
        lines.append(f"{method},{timings[method]:.6f}")
        report.append(f"{method}: {timings[method]:.4f} s/frame")
    if "ratio" in timings:
        lines.append(f"ratio,{timings['ratio']:.6f}")
        report.append(f"ratio {methods[0]}/{methods[-1]}: {timings['ratio']:.3f}")
    (out_dir / "bench.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    (out_dir / "bench.txt").write_text("\n".join(report) + "\n", encoding="ascii")
    print("\n".join(report))
    return EXIT_OK


def cmd_analyze(args) -> int:
    seed = _require_seed(args)
    out_dir = Path(args.out_dir)
    resolved = _resolved_config(args)

    if args.model:
        weights = classifier.load_model(args.model).weights
        bias = classifier.load_model(args.model).bias
    else:
        weights = np.zeros(analysis.N_FEATURES if hasattr(analysis, "N_FEATURES") else 26)
        bias = 0.0
    occupancy, bg_count = analysis.streak_occupancy(args.streak_angle)
    peak = args.noise_mu + args.layer_psnr * args.noise_sigma
    side = args.noise_mu + 0.6 * args.layer_psnr * args.noise_sigma
    params = analysis.AnalysisParams(
        noise_mu=args.noise_mu,
        noise_sigma=args.noise_sigma,
        layer_means=(side, peak, side),
        layer_stds=(args.noise_sigma,) * 3,
        occupancy=occupancy,
        bg_count=bg_count,
        k=args.k,
        weights=weights,
        bias=bias,
    )
    (mu_sb, s_sb), (mu_st, s_st) = analysis.subregion_distributions(params)
    samples, grid, cdf, pdf = analysis.max_gray_distribution(params, args.samples, seed)

    _write_run_config(out_dir, resolved, args.command)
    from scipy.stats import norm as _norm

    with open(out_dir / "feature_pdfs.csv", "w", encoding="ascii") as fh:
        fh.write(f"# {_stamp(resolved)}\n")
        fh.write("gray,pdf_bg_mean,pdf_target_mean,pdf_max_gray,pdf_bg_pixel,pdf_center_pixel,cdf_max_gray\n")
        pdf_bg = _norm.pdf(grid, mu_sb, s_sb)
        pdf_tg = _norm.pdf(grid, mu_st, s_st)
        pdf_px_bg = _norm.pdf(grid, params.noise_mu, params.noise_sigma)
        pdf_px_c = _norm.pdf(grid, params.layer_means[1], params.layer_stds[1])
        for i in range(grid.size):
            fh.write(
                f"{grid[i]:.6f},{pdf_bg[i]:.8e},{pdf_tg[i]:.8e},{pdf[i]:.8e},"
                f"{pdf_px_bg[i]:.8e},{pdf_px_c[i]:.8e},{cdf[i]:.8e}\n"
            )
    mu_a1, sigma_a1 = analysis.weighted_sum_distribution(params)
    a1, a2 = analysis.sample_weighted_terms(params, args.samples, seed)
    with open(out_dir / "weighted_sum.csv", "w", encoding="ascii") as fh:
        fh.write(f"# {_stamp(resolved)}\n")
        fh.write(f"# closed form: mu_a1={mu_a1:.6f} sigma_a1={sigma_a1:.6f}\n")
        fh.write("a1_sample,a2_sample\n")
        for u, v in zip(a1, a2):
            fh.write(f"{u:.6f},{v:.6f}\n")
    print(f"analysis tables written to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, needs_seed: bool):
    parser.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    parser.add_argument("--out-dir", type=str, default=".", help="output directory")
    if needs_seed:
        parser.add_argument("--seed", type=int, default=None, help="master seed (required)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streaklite", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"streaklite {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize labeled frames and dataset rows")
    _add_common(p, needs_seed=True)
    p.add_argument("--frames", type=int, default=simulate.DEFAULT_TRAIN_FRAMES)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--noise-mu", type=float, default=30.0)
    p.add_argument("--noise-sigma", type=float, default=8.0)
    p.add_argument("--psnr", type=float, default=2.0)
    p.add_argument("--angle-min", type=float, default=0.0)
    p.add_argument("--angle-max", type=float, default=180.0)
    p.add_argument("--length-min", type=float, default=10.0)
    p.add_argument("--length-max", type=float, default=22.0)
    p.add_argument("--mask-threshold", type=float, default=4.0)
    p.add_argument("--psf-sigma", type=float, default=1.35)
    p.add_argument("--dataset", type=str, default="", help="also write per-pixel rows CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="k-fold validate and train the classifier")
    _add_common(p, needs_seed=True)
    p.add_argument("--dataset", type=str, required=True, help="rows CSV from simulate")
    p.add_argument("--model", type=str, default="model.lsvc")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--c", type=float, default=3e-4)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--heatmap", type=str, default="", help="write 5x5 weight heatmap CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run the pipeline on a PGM frame")
    _add_common(p, needs_seed=False)
    p.add_argument("--frame", type=str, required=True)
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--t-h", type=int, default=35, help="component size threshold")
    p.add_argument("--l-max", type=int, default=10, help="growth cap per direction")
    p.add_argument("--no-growth", action="store_true", help="stop after crude classification")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sweep", help="Monte-Carlo metric sweeps")
    _add_common(p, needs_seed=True)
    p.add_argument("--kind", choices=sweeps.SWEEP_KINDS, required=True)
    p.add_argument("--grid", type=str, required=True, help="comma-separated values")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--methods", type=str, default="crude,grown")
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--noise-mu", type=float, default=30.0)
    p.add_argument("--noise-sigma", type=float, default=8.0)
    p.add_argument("--psnr", type=float, default=2.0)
    p.add_argument("--length", type=float, default=16.0)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--t-h", type=int, default=35)
    p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="runtime comparison on a fixed frame")
    _add_common(p, needs_seed=True)
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--methods", type=str, default="grown,baseline")
    p.add_argument("--width", type=int, default=1280)
    p.add_argument("--height", type=int, default=960)
    p.add_argument("--repetitions", type=int, default=150)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("analyze", help="template capability analysis tables")
    _add_common(p, needs_seed=True)
    p.add_argument("--noise-mu", type=float, default=30.0)
    p.add_argument("--noise-sigma", type=float, default=8.0)
    p.add_argument("--layer-psnr", type=float, default=2.0, help="central layer peak in sigmas")
    p.add_argument("--streak-angle", type=float, default=30.0)
    p.add_argument("--k", type=int, default=24, help="number of pure background tiles")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--model", type=str, default="", help="model file providing weights")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # first pass only to find --config of the chosen subcommand
    args, _ = parser.parse_known_args(argv)
    if getattr(args, "config", None):
        sub_parser = None
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                sub_parser = action.choices[args.command]
        try:
            _apply_config(sub_parser, _parse_config_file(args.config))
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PgmFormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:  # noqa: BLE001 - last resort, mapped to exit code 4
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
