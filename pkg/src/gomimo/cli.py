"""Command-line entry point: wires config files to experiments, manages
seeds and artifacts (models, CSVs, manifests).

Exit codes: 0 success, 2 config error, 3 runtime/numeric error, 4 analysis
target unbracketed or censored. Default output directory comes from
GOMIMO_OUT, overridable per run.
"""

import argparse
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (RunConfig, apply_overrides, load_config_file, load_preset,
                     render_ini, resolve_scenario, train_config_from)
from .detectors import build_detector, pseudo_inverse, feature_matrix, PreprocessConfig
from .errors import ConfigError, GomimoError, UnbracketedTargetError
from .harness import (SweepConfig, run_alpha_sweep, run_ber_sweep,
                      run_input_ablation, run_mse_log, run_timing_benchmark,
                      train_detector, write_ablation_csv, write_alpha_csv,
                      write_ber_csv, write_mse_csv, write_timing_csv)
from .modulation import enumerate_codebook
from .neural import load_model, save_model

SUBCOMMANDS = ("channel-dump", "codebook-dump", "train", "ber-sweep", "mse-log",
               "alpha-sweep", "ablate-input", "bench", "reproduce-figure")


def _load_run_config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.config:
        config = load_config_file(args.config)
    else:
        config = load_preset(args.preset or "table1_center")
    if args.set:
        config = apply_overrides(config, args.set)
    return config


def _output_dir(args, config: RunConfig) -> Path:
    out = args.out or config.get("run", "output_dir") \
        or os.environ.get("GOMIMO_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, command: str, config: RunConfig, extra=None) -> None:
    manifest = {
        "command": command,
        "source": config.source,
        "config": config.values,
        "versions": {
            "gomimo": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "manifest.ini", "w", encoding="utf-8") as fh:
        fh.write(render_ini(config))


def _model_path(out: Path, config: RunConfig, scheme_kind: str, flavor: str) -> Path:
    configured = config.get("detector", "model").strip()
    if configured:
        return Path(configured)
    return out / f"model_{scheme_kind}_{flavor}.npz"


def _build_configured_detector(scenario, config: RunConfig, out: Path):
    kind = config.get("detector", "kind").strip().lower()
    codebook = enumerate_codebook(scenario.scheme)
    if kind == "joint_ml":
        return build_detector(kind, scenario.scheme, codebook, channel=scenario.channel)
    if kind == "zf_ml":
        return build_detector(kind, scenario.scheme, codebook,
                              equalizer=pseudo_inverse(scenario.channel))
    flavor = "zf" if kind == "zf_dnn" else "blind"
    path = _model_path(out, config, scenario.scheme.kind, flavor)
    if not path.exists():
        raise ConfigError(f"detector {kind} needs a trained model; expected it at "
                          f"{path} (run `gomimo train` first)")
    params, _, _ = load_model(path)
    if kind == "zf_dnn":
        return build_detector(kind, scenario.scheme, codebook,
                              equalizer=pseudo_inverse(scenario.channel),
                              network=params)
    feature_kind = config.get("detector", "feature").strip().lower()
    if feature_kind == "identity":
        feature = np.eye(scenario.channel.num_pds)
    else:
        feature = feature_matrix(scenario.scheme.patterns)
    pre = PreprocessConfig(alpha=config.getfloat("detector", "alpha"), feature=feature)
    return build_detector(kind, scenario.scheme, codebook, preprocess_config=pre,
                          network=params)


def _sweep_config(scenario, detector, config: RunConfig, label: str) -> SweepConfig:
    return SweepConfig(
        scheme=scenario.scheme, channel=scenario.channel, detector=detector,
        snr_list_db=config.getfloats("sweep", "snr_list_db"),
        vectors_per_point=config.getint("sweep", "vectors_per_point"),
        min_error_count=config.getint("sweep", "min_error_count"),
        seed=config.getint("run", "seed"), detector_label=label,
        scheme_label=scenario.scheme.kind, location_label=scenario.location_label)


def _print_curve(label: str, curve) -> None:
    for p in curve:
        tag = " censored" if p.censored else ""
        print(f"{label} snr={p.snr_db:g} dB ber={p.ber:.3e} "
              f"errors={p.bit_errors} bits={p.bits_sent}{tag}")


def cmd_channel_dump(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    path = out / "channel.csv"
    with open(path, "w", encoding="utf-8") as fh:
        for row in scenario.channel.entries:
            fh.write(",".join(f"{v:.17e}" for v in row) + "\n")
    _write_manifest(out, "channel-dump", config)
    print(f"wrote {path} ({scenario.channel.num_pds}x{scenario.channel.num_leds}, "
          f"receiver={scenario.location_label})")
    return 0


def cmd_codebook_dump(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    codebook = enumerate_codebook(scenario.scheme)
    out = _output_dir(args, config)
    path = out / "codebook.csv"
    nt = scenario.scheme.num_leds
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bits," + ",".join(f"x{t + 1}" for t in range(nt)) + "\n")
        for frame, vec in zip(codebook.frames, codebook.vectors):
            bits = "".join(str(b) for b in frame)
            fh.write(bits + "," + ",".join(repr(float(v)) for v in vec) + "\n")
    _write_manifest(out, "codebook-dump", config)
    print(f"wrote {path} ({codebook.size} codewords, {scenario.scheme.kind})")
    return 0


def cmd_train(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    train_cfg = train_config_from(config)
    feature_kind = config.get("detector", "feature").strip().lower()
    trained = train_detector(scenario.scheme, scenario.channel, train_cfg,
                             feature_kind=feature_kind)
    path = _model_path(out, config, scenario.scheme.kind, train_cfg.flavor)
    save_model(path, trained.params, trained.architecture, train_cfg)
    write_mse_csv(out / "mse_log.csv",
                  [{"training_snr_db": train_cfg.training_snr_db, **e}
                   for e in trained.mse_log])
    _write_manifest(out, "train", config)
    best = min(e["val_mse"] for e in trained.mse_log)
    print(f"trained {scenario.scheme.kind} {train_cfg.flavor} detector "
          f"({train_cfg.epochs} epochs, best val MSE {best:.5f}) -> {path}")
    return 0


def cmd_ber_sweep(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    label = config.get("detector", "kind").strip().lower()
    detector = _build_configured_detector(scenario, config, out)
    sweep = _sweep_config(scenario, detector, config, label)
    curve = run_ber_sweep(sweep, threads=args.threads)
    _print_curve(label, curve)
    write_ber_csv(out / "ber_sweep.csv",
                  [(label, scenario.scheme.kind, scenario.location_label, p)
                   for p in curve])
    _write_manifest(out, "ber-sweep", config)
    print(f"wrote {out / 'ber_sweep.csv'}")
    return 0


def cmd_mse_log(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    base = train_config_from(config)
    snrs = config.getfloats("train", "training_snr_list_db")
    configs = [base.__class__(**{**base.to_dict(), "training_snr_db": s}) for s in snrs]
    rows = run_mse_log(scenario.scheme, scenario.channel, configs)
    write_mse_csv(out / "mse_log.csv", rows)
    _write_manifest(out, "mse-log", config)
    for snr in snrs:
        best = min(r["val_mse"] for r in rows if r["training_snr_db"] == snr)
        print(f"training snr={snr:g} dB best val MSE {best:.5f}")
    print(f"wrote {out / 'mse_log.csv'}")
    return 0


def cmd_alpha_sweep(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    rows = run_alpha_sweep(
        scenario.scheme, scenario.channel, train_config_from(config),
        config.getfloats("sweep", "alpha_list"),
        config.getfloats("sweep", "snr_fixed_db"),
        seed=config.getint("run", "seed"),
        vectors_per_point=config.getint("sweep", "vectors_per_point"),
        min_error_count=config.getint("sweep", "min_error_count"),
        threads=args.threads)
    write_alpha_csv(out / "alpha_sweep.csv", rows)
    _write_manifest(out, "alpha-sweep", config)
    for r in rows:
        print(f"alpha={r['alpha']:g} snr={r['snr_db']:g} dB ber={r['ber']:.3e}")
    print(f"wrote {out / 'alpha_sweep.csv'}")
    return 0


def cmd_ablate_input(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    target = config.getfloat("sweep", "target_ber")
    full, scaled_only, gain = run_input_ablation(
        scenario.scheme, scenario.channel, train_config_from(config),
        config.getfloats("sweep", "snr_list_db"),
        seed=config.getint("run", "seed"),
        vectors_per_point=config.getint("sweep", "vectors_per_point"),
        min_error_count=config.getint("sweep", "min_error_count"),
        threads=args.threads, target_ber=target)
    entries = [(scenario.scheme.kind, "scaled_features", p) for p in full]
    entries += [(scenario.scheme.kind, "scaled_only", p) for p in scaled_only]
    write_ablation_csv(out / "ablation.csv", entries)
    _write_manifest(out, "ablate-input", config,
                    extra={"gain_db_at_target": gain, "target_ber": target})
    _print_curve("scaled_features", full)
    _print_curve("scaled_only", scaled_only)
    print(f"wrote {out / 'ablation.csv'}")
    if gain is None:
        print(f"BER {target:g} not bracketed by both arms; no gain readout")
        return 4
    print(f"feature-mixing gain at BER {target:g}: {gain:.2f} dB")
    return 0


def cmd_bench(args) -> int:
    config = _load_run_config(args)
    scenario = resolve_scenario(config)
    out = _output_dir(args, config)
    reports, errors = _bench_scheme(scenario, config, out)
    write_timing_csv(out / "timing.csv",
                     [(scenario.scheme.kind, r) for r in reports])
    _write_manifest(out, "bench", config)
    for r in reports:
        print(f"{r.detector}: {r.vectors_detected} vectors in "
              f"{r.wall_seconds:.3f} s ({r.per_vector_microseconds:.1f} us/vector, "
              f"{errors[r.detector]} bit errors)")
    print(f"wrote {out / 'timing.csv'}")
    return 0


def _train_both_dnns(scenario, config, out):
    """Train (or reuse) the blind and ZF DNN detectors for a scenario."""
    detectors = {}
    for flavor, kind in (("blind", "blind_dnn"), ("zf", "zf_dnn")):
        cfg = train_config_from(config, flavor=flavor)
        path = _model_path(out, config, scenario.scheme.kind, flavor)
        trained = train_detector(scenario.scheme, scenario.channel, cfg)
        save_model(path, trained.params, trained.architecture, cfg)
        detectors[kind] = trained.detector
    return detectors


def _bench_scheme(scenario, config, out):
    codebook = enumerate_codebook(scenario.scheme)
    detectors = {
        "joint_ml": build_detector("joint_ml", scenario.scheme, codebook,
                                   channel=scenario.channel),
        "zf_ml": build_detector("zf_ml", scenario.scheme, codebook,
                                equalizer=pseudo_inverse(scenario.channel)),
    }
    detectors.update(_train_both_dnns(scenario, config, out))
    return run_timing_benchmark(
        scenario.scheme, scenario.channel, detectors,
        vector_count=config.getint("sweep", "timing_vectors"),
        snr_db=config.getfloat("sweep", "timing_snr_db"),
        seed=config.getint("run", "seed"))


def cmd_reproduce_figure(args) -> int:
    figure = args.figure
    if figure in (4, 5) and not (args.config or args.preset):
        # Default to the matching detector-parameter preset for the figure.
        args.preset = "table2_gosm_center" if figure == 4 else "table3_gosmp_center"
    config = _load_run_config(args)
    if figure in (2, 3):
        return cmd_mse_log(args)
    if figure in (4, 5):
        return _figure_ber_all_detectors(args, config,
                                         "gosm" if figure == 4 else "gosmp")
    if figure == 6:
        return _figure_ablation_both(args, config)
    if figure == 7:
        return cmd_alpha_sweep(args)
    if figure == 8:
        return _figure_timing_both(args, config)
    raise ConfigError(f"no figure {figure}; choose 2-8")


def _figure_ber_all_detectors(args, config: RunConfig, kind: str) -> int:
    scenario = resolve_scenario(config, scheme_kind=kind)
    out = _output_dir(args, config)
    codebook = enumerate_codebook(scenario.scheme)
    equalizer = pseudo_inverse(scenario.channel)
    detectors = {
        "joint_ml": build_detector("joint_ml", scenario.scheme, codebook,
                                   channel=scenario.channel),
        "zf_ml": build_detector("zf_ml", scenario.scheme, codebook,
                                equalizer=equalizer),
    }
    detectors.update(_train_both_dnns(scenario, config, out))
    entries = []
    for label, det in detectors.items():
        curve = run_ber_sweep(_sweep_config(scenario, det, config, label),
                              threads=args.threads)
        _print_curve(label, curve)
        entries += [(label, scenario.scheme.kind, scenario.location_label, p)
                    for p in curve]
    write_ber_csv(out / "ber_sweep.csv", entries)
    _write_manifest(out, f"reproduce-figure {args.figure}", config)
    print(f"wrote {out / 'ber_sweep.csv'}")
    return 0


def _figure_ablation_both(args, config: RunConfig) -> int:
    out = _output_dir(args, config)
    target = config.getfloat("sweep", "target_ber")
    entries = []
    gains = {}
    for kind in ("gosm", "gosmp"):
        scenario = resolve_scenario(config, scheme_kind=kind)
        full, scaled_only, gain = run_input_ablation(
            scenario.scheme, scenario.channel, train_config_from(config),
            config.getfloats("sweep", "snr_list_db"),
            seed=config.getint("run", "seed"),
            vectors_per_point=config.getint("sweep", "vectors_per_point"),
            min_error_count=config.getint("sweep", "min_error_count"),
            threads=args.threads, target_ber=target)
        gains[kind] = gain
        entries += [(kind, "scaled_features", p) for p in full]
        entries += [(kind, "scaled_only", p) for p in scaled_only]
        if gain is not None:
            print(f"{kind}: feature-mixing gain at BER {target:g}: {gain:.2f} dB")
    write_ablation_csv(out / "ablation.csv", entries)
    _write_manifest(out, "reproduce-figure 6", config,
                    extra={"gains_db_at_target": gains, "target_ber": target})
    print(f"wrote {out / 'ablation.csv'}")
    if any(g is None for g in gains.values()):
        print(f"BER {target:g} not bracketed by every arm; no gain readout")
        return 4
    return 0


def _figure_timing_both(args, config: RunConfig) -> int:
    out = _output_dir(args, config)
    entries = []
    for kind in ("gosm", "gosmp"):
        scenario = resolve_scenario(config, scheme_kind=kind)
        reports, errors = _bench_scheme(scenario, config, out)
        for r in reports:
            print(f"{kind} {r.detector}: {r.wall_seconds:.3f} s "
                  f"({r.per_vector_microseconds:.1f} us/vector)")
        entries += [(kind, r) for r in reports]
    write_timing_csv(out / "timing.csv", entries)
    _write_manifest(out, "reproduce-figure 8", config)
    print(f"wrote {out / 'timing.csv'}")
    return 0


COMMANDS = {
    "channel-dump": cmd_channel_dump,
    "codebook-dump": cmd_codebook_dump,
    "train": cmd_train,
    "ber-sweep": cmd_ber_sweep,
    "mse-log": cmd_mse_log,
    "alpha-sweep": cmd_alpha_sweep,
    "ablate-input": cmd_ablate_input,
    "bench": cmd_bench,
    "reproduce-figure": cmd_reproduce_figure,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gomimo",
        description="Generalized optical MIMO link simulator and detector bench")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--preset", help="built-in scenario preset")
        p.add_argument("--set", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--out", help="output directory (default: GOMIMO_OUT or ./out)")
        p.add_argument("--threads", type=int, default=1,
                       help="harness parallelism (default 1, fully reproducible)")
        if name == "reproduce-figure":
            p.add_argument("figure", type=int, help="figure number, 2-8")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as ex:
        print(f"config error: {ex}", file=sys.stderr)
        return 2
    except UnbracketedTargetError as ex:
        print(f"analysis error: {ex}", file=sys.stderr)
        return 4
    except GomimoError as ex:
        print(f"runtime error: {ex}", file=sys.stderr)
        return 3
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as ex:
        print(f"numeric error: {ex}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
