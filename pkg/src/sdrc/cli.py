"""Configuration-driven experiment runner.

Subcommands: simulate | extract | benchmark | sweep | speech | selftest.
Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import container, corpus, pipeline
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .nodes import hardware_preset_nodes
from .readout import SplitSpec
from .reservoir import simulate as run_simulator
from .search import field_sweep
from .tasks import TaskDataset, gen_classification_stream, gen_narma2, gen_parity


def _load(config_path, output, seed, threads) -> tuple[ExperimentConfig, str, Path]:
    cfg = load_config(config_path)
    if seed is not None:
        cfg = replace(cfg, reservoir=replace(cfg.reservoir, seed=seed),
                      task=replace(cfg.task, seed=seed))
    if threads is not None:
        cfg = replace(cfg, threads=threads)
    out_dir = Path(output or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return cfg, config_hash(cfg), out_dir


def _write_csv(path, hash_, header, rows):
    lines = [f"# config_hash={hash_}", ",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    container.atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def _write_manifest(out_dir, hash_, command, files):
    payload = {"config_hash": hash_, "command": command, "outputs": sorted(files)}
    container.atomic_write_text(
        out_dir / "manifest.json", json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )


def _task_dataset(cfg: ExperimentConfig) -> TaskDataset:
    if cfg.task.kind == "parity":
        return gen_parity(cfg.task.length, cfg.task.k_max, cfg.task.seed)
    return gen_narma2(cfg.task.length, cfg.task.seed)


def _pool_nodes(cfg: ExperimentConfig):
    ext = cfg.extraction
    n_det = cfg.reservoir.n_detectors
    if ext.mode == "hardware_preset":
        return hardware_preset_nodes(n_det, ext.diode_params())
    centers = None
    if ext.centers_ghz is not None:
        centers = [c * 1e9 for c in ext.centers_ghz]
    return pipeline.spectral_pool_nodes(n_det, centers, ext.bandwidth, ext.order)


def _states_for_task(cfg: ExperimentConfig, task: TaskDataset):
    ext = cfg.extraction
    nodes = None if ext.mode == "virtual" else _pool_nodes(cfg)
    return pipeline.reservoir_states(
        task.inputs, cfg.reservoir, cfg.pulse, cfg.drive_sample_rate,
        "spectral" if ext.mode == "hardware_preset" else ext.mode,
        nodes, ext.nodes_per_symbol, cfg.threads,
    )


_shared = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(), help="Experiment config (TOML)."),
    click.option("--output", type=click.Path(), default=None,
                 help="Output directory (overrides config)."),
    click.option("--seed", type=int, default=None,
                 help="Override reservoir/task seeds."),
    click.option("--threads", type=int, default=None,
                 help="Worker thread cap (overrides config)."),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@click.group()
def cli():
    """Spectral-dynamics reservoir computing experiment runner."""


@cli.command()
@shared_options
def simulate(config_path, output, seed, threads):
    """Simulate detector responses for the configured task drive."""
    cfg, hash_, out_dir = _load(config_path, output, seed, threads)
    task = _task_dataset(cfg)
    drive = pipeline.build_drive(task.inputs, cfg.pulse, cfg.drive_sample_rate)
    responses = run_simulator(drive, cfg.reservoir)
    files = []
    for r in responses:
        name = f"detector_{r.detector_index:02d}.bin"
        container.write_signal(out_dir / name, r.signal)
        files.append(name)
    _write_manifest(out_dir, hash_, "simulate", files + ["manifest.json"])
    click.echo(f"wrote {len(files)} detector responses to {out_dir}")


@cli.command()
@shared_options
def extract(config_path, output, seed, threads):
    """Simulate and extract reservoir states to CSV."""
    cfg, hash_, out_dir = _load(config_path, output, seed, threads)
    task = _task_dataset(cfg)
    states = _states_for_task(cfg, task)
    states.to_csv(out_dir / "states.csv", header_prefix=f"# config_hash={hash_}\n")
    _write_manifest(out_dir, hash_, "extract", ["states.csv", "manifest.json"])
    click.echo(f"wrote {states.n_symbols}x{states.n_nodes} state matrix to {out_dir}")


@cli.command()
@shared_options
def benchmark(config_path, output, seed, threads):
    """Run simulate -> extract -> train -> evaluate for the configured task."""
    cfg, hash_, out_dir = _load(config_path, output, seed, threads)
    task = _task_dataset(cfg)
    states = _states_for_task(cfg, task)
    split_spec = SplitSpec(cfg.readout.washout, cfg.readout.train_fraction)
    result = pipeline.evaluate_task(states, task, split_spec, cfg.readout.lam)
    files = ["metrics.json", "manifest.json"]
    metrics = {"config_hash": hash_, "task": cfg.task.kind,
               "lambda": result["lambda"]}
    if cfg.task.kind == "parity":
        metrics["capacity"] = result["capacity"]
        _write_csv(out_dir / "r2_vs_k.csv", hash_, ["K", "r2"],
                   [(k + 1, float(r)) for k, r in enumerate(result["r2_per_k"])])
        files.append("r2_vs_k.csv")
    else:
        metrics["nmse"] = result["nmse"]
        _write_csv(out_dir / "trace.csv", hash_, ["index", "target", "prediction"],
                   [(i, float(t), float(p)) for i, (t, p) in
                    enumerate(zip(result["targets"][:, 0], result["predictions"][:, 0]))])
        files.append("trace.csv")
    container.atomic_write_text(
        out_dir / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    )
    _write_manifest(out_dir, hash_, "benchmark", files)
    shown = metrics.get("capacity", metrics.get("nmse"))
    click.echo(f"{cfg.task.kind}: {shown:.6g}")


@cli.command()
@shared_options
def sweep(config_path, output, seed, threads):
    """Bias-field sweep with node-selection search at each field."""
    cfg, hash_, out_dir = _load(config_path, output, seed, threads)
    if not cfg.search.fields_mT:
        raise ConfigError("search.fields_mT: empty field list")
    task = _task_dataset(cfg)
    split_spec = SplitSpec(cfg.readout.washout, cfg.readout.train_fraction)
    lam = cfg.readout.lam if cfg.readout.lam is not None else 1e-6
    ext = cfg.extraction
    centers = ([c * 1e9 for c in ext.centers_ghz] if ext.centers_ghz
               else [0.1e9 * (i + 1) for i in range(50)])
    factory = pipeline.make_field_evaluator_factory(
        task, cfg.reservoir, cfg.pulse, cfg.drive_sample_rate, split_spec, lam,
        lambda n_det: pipeline.spectral_pool_nodes(n_det, centers, ext.bandwidth,
                                                   ext.order),
        pool_per_detector=len(centers), threads=cfg.threads,
    )
    result = field_sweep(
        [f * 1e-3 for f in cfg.search.fields_mT], factory,
        cfg.search.n_per_detector, cfg.search.n_trials, cfg.search.top_k,
        master_seed=cfg.reservoir.seed, threads=cfg.threads,
    )
    metric_name = "capacity" if cfg.task.kind == "parity" else "nmse"
    _write_csv(out_dir / "sweep.csv", hash_,
               ["field_mT", "metric_name", "best", "worst", "mean"],
               [(fr.bias_field * 1e3, metric_name, fr.best, fr.worst, fr.mean)
                for fr in result.results])
    occ_rows = []
    for fr in result.results:
        for i, count in enumerate(fr.occurrence_counts):
            occ_rows.append((i, centers[i] / 1e9, int(count), fr.bias_field * 1e3))
    _write_csv(out_dir / "occurrences.csv", hash_,
               ["node_index", "center_GHz", "occurrence_count", "field_mT"],
               occ_rows)
    _write_manifest(out_dir, hash_, "sweep",
                    ["sweep.csv", "occurrences.csv", "manifest.json"])
    click.echo(f"swept {len(result.results)} fields -> {out_dir}")


@cli.command()
@shared_options
@click.option("--synthetic", is_flag=True, help="Use the bundled synthetic corpus.")
@click.option("--wav-dir", type=click.Path(), default=None,
              help="Directory of <label>/*.wav files.")
def speech(config_path, output, seed, threads, synthetic, wav_dir):
    """Streaming speaker classification under the shuffle protocol."""
    cfg, hash_, out_dir = _load(config_path, output, seed, threads)
    sp = cfg.speech
    if synthetic:
        waves, labels, class_names = corpus.synthetic_corpus(
            sp.samples_per_class, sp.n_classes, sp.sample_length,
            seed=sp.corpus_seed,
        )
    elif wav_dir:
        waves, labels, class_names = corpus.load_wav_directory(wav_dir)
    else:
        raise ConfigError("speech: pass --synthetic or --wav-dir")
    dataset = gen_classification_stream(
        waves, labels, sp.n_symbols, target_length=sp.sample_length,
        class_names=class_names,
    )
    ext = cfg.extraction
    nodes = None if ext.mode in ("virtual", "baseline") else _pool_nodes(cfg)
    states = pipeline.speech_states(
        dataset, cfg.reservoir, cfg.pulse, cfg.drive_sample_rate,
        "spectral" if ext.mode == "hardware_preset" else ext.mode,
        sp.n_symbols, sp.sample_length, nodes, ext.nodes_per_symbol, cfg.threads,
    )
    lam = cfg.readout.lam if cfg.readout.lam is not None else 1e-6
    accuracies, confusion, trace = pipeline.run_speech_protocol(
        states, dataset, sp.n_shuffles, sp.train_samples, lam,
        base_seed=cfg.reservoir.seed,
    )
    metrics = {
        "config_hash": hash_,
        "mean_accuracy": float(accuracies.mean()),
        "per_trial_accuracy": [float(a) for a in accuracies],
        "classes": list(dataset.class_names),
    }
    container.atomic_write_text(
        out_dir / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    )
    _write_csv(out_dir / "confusion.csv", hash_,
               ["true_class", "predicted_class", "count"],
               [(i, j, int(confusion[i, j]))
                for i in range(confusion.shape[0])
                for j in range(confusion.shape[1])])
    probs, _ = trace
    _write_csv(out_dir / "probs.csv", hash_,
               ["symbol"] + [f"p_{c}" for c in dataset.class_names],
               [(i, *[float(p) for p in row]) for i, row in enumerate(probs)])
    _write_manifest(out_dir, hash_, "speech",
                    ["metrics.json", "confusion.csv", "probs.csv", "manifest.json"])
    click.echo(f"mean accuracy over {sp.n_shuffles} shuffles: {accuracies.mean():.4f}")


@cli.command()
def selftest():
    """Run the quick oracle suite from every module."""
    failures = _run_selftest(click.echo)
    if failures:
        raise RuntimeError(f"{failures} selftest check(s) failed")
    click.echo("all selftest checks passed")


def _run_selftest(echo) -> int:
    from . import selftest as st

    failures = 0
    for name, fn in st.CHECKS:
        try:
            fn()
            echo(f"PASS {name}")
        except Exception as exc:  # report every failing oracle, keep going
            failures += 1
            echo(f"FAIL {name}: {exc}")
    return failures


def main():
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(3)
    except click.exceptions.ClickException as exc:
        exc.show()
        sys.exit(2)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
