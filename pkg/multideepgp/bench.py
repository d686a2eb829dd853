"""
Replicate pipeline shared by the ``simulate`` and ``bench`` commands.

Every replicate draws from ``RngStream(master_seed).split('replicate', r)``
and splits that stream per stage (``simulate``, ``split``, ``network``,
``predict``), so a replicate's numbers do not depend on which worker runs it,
how many workers there are, or which other methods are enabled.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .baselines import kriging_prediction
from .datagen import Dataset, split
from .exceptions import MultiDeepGPError
from .metrics import aggregate, replicate_frame, score_prediction, timing_summary
from .numerics import RngStream
from .predict import point_prediction, predict
from .runconfig import RunConfig
from .training import fit

logger = logging.getLogger(__name__)

NETWORK_METHODS = ('multideepgp', 'multidnn')


@dataclass
class ReplicateResult:
    replicate: int
    scores: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    streams: dict[str, int] = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class BenchResult:
    replicates: pd.DataFrame
    timings: pd.DataFrame
    failures: list[ReplicateResult]
    manifest: dict

    @property
    def ok(self) -> bool:
        return not self.failures


def replicate_stream(master_seed: int, replicate: int) -> RngStream:
    return RngStream(master_seed).split('replicate', replicate)


def simulate_replicate(config: RunConfig, replicate: int) -> tuple[Dataset, Dataset, dict[str, int]]:
    root = replicate_stream(config.bench.seed, replicate)
    streams = {'replicate': root.stream_id}
    simulate_rng, split_rng = root.split('simulate'), root.split('split')
    streams.update(simulate=simulate_rng.stream_id, split=split_rng.stream_id)
    data = config.load_dataset(simulate_rng)
    train, test = split(data, config.train_size(), split_rng)
    return train, test, streams


def _score_rows(replicate: int, method: str, prediction, truth: np.ndarray) -> list[dict]:
    return [
        {'replicate': replicate, 'method': method, 'outcome': outcome, 'metric': metric, 'value': value}
        for (outcome, metric), value in score_prediction(prediction, truth).items()
    ]


def run_replicate(config: RunConfig, replicate: int) -> ReplicateResult:
    """Simulate, split, fit every enabled method, predict and score one replicate."""
    methods = config.bench.methods
    train, test, streams = simulate_replicate(config, replicate)
    root = replicate_stream(config.bench.seed, replicate)
    result = ReplicateResult(replicate=replicate, streams=streams)

    if any(m in methods for m in NETWORK_METHODS):
        network_rng, predict_rng = root.split('network'), root.split('predict')
        result.streams.update(network=network_rng.stream_id, predict=predict_rng.stream_id)
        started = time.perf_counter()
        embedding = config.embedding(train.coords)
        net = config.network(embedding.output_dim(train.coords.shape[1]), train.n, train.covariate_dim)
        model, report = fit(train, net, config.train, embedding, rng=network_rng, model_hash=config.model_hash)
        fit_seconds = time.perf_counter() - started

        if 'multideepgp' in methods:
            started = time.perf_counter()
            prediction = predict(model, test.coords, test.features, config.predict, rng=predict_rng)
            result.timings.append(
                {'replicate': replicate, 'method': 'multideepgp', 'seconds': fit_seconds + time.perf_counter() - started}
            )
            result.scores.extend(_score_rows(replicate, 'multideepgp', prediction, test.responses))
        if 'multidnn' in methods:
            started = time.perf_counter()
            prediction = point_prediction(model, test.coords, test.features)
            result.timings.append(
                {'replicate': replicate, 'method': 'multidnn', 'seconds': fit_seconds + time.perf_counter() - started}
            )
            result.scores.extend(_score_rows(replicate, 'multidnn', prediction, test.responses))

    if 'kriging' in methods:
        started = time.perf_counter()
        kcfg = replace(config.kriging, level=config.predict.level)
        prediction = kriging_prediction(train, test.coords, kcfg)
        result.timings.append({'replicate': replicate, 'method': 'kriging', 'seconds': time.perf_counter() - started})
        result.scores.extend(_score_rows(replicate, 'kriging', prediction, test.responses))
    return result


def _run_guarded(config: RunConfig, replicate: int) -> ReplicateResult:
    try:
        return run_replicate(config, replicate)
    except (MultiDeepGPError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.error('Replicate %d failed: %s', replicate, exc)
        return ReplicateResult(replicate=replicate, error=f'{type(exc).__name__}: {exc}')


def run_bench(config: RunConfig, workers: int | None = None, replicates: int | None = None) -> BenchResult:
    workers = workers or config.bench.workers
    count = replicates or config.bench.replicates
    logger.info(
        'Benchmark: %d replicates of %s with methods %s on %d worker(s)',
        count, config.data.source, ','.join(config.bench.methods), workers,
    )
    indices = list(range(count))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_guarded, [config] * count, indices))
    else:
        results = [_run_guarded(config, r) for r in indices]

    scores = [row for result in results for row in result.scores]
    timings = pd.DataFrame(
        [row for result in results for row in result.timings], columns=['replicate', 'method', 'seconds']
    )
    failures = [result for result in results if result.failed]
    manifest = build_manifest(config, [{'replicate': r.replicate, 'streams': r.streams} for r in results])
    return BenchResult(replicates=replicate_frame(scores), timings=timings, failures=failures, manifest=manifest)


def build_manifest(config: RunConfig, entries: list[dict]) -> dict:
    return {
        'tool': 'multideepgp',
        'version': __version__,
        'config_hash': config.config_hash,
        'model_hash': config.model_hash,
        'master_seed': config.bench.seed,
        'source': config.data.source,
        'methods': list(config.bench.methods),
        'replicates': entries,
        'config': config.document,
    }


def write_manifest(manifest: dict, out_dir) -> Path:
    path = Path(out_dir) / 'manifest.json'
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write('\n')
    return path


def _write_frame(frame: pd.DataFrame, path: Path, header: str) -> None:
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        fh.write(f'# {header}\n')
        frame.to_csv(fh, index=False, lineterminator='\n')


def write_bench_outputs(config: RunConfig, result: BenchResult, out_dir) -> dict[str, Path]:
    """Write replicates.csv, report.csv, timing.csv, manifest.json (and failures.csv)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = config.header()
    paths = {'replicates': out_dir / 'replicates.csv', 'timing': out_dir / 'timing.csv'}

    _write_frame(result.replicates, paths['replicates'], header)
    _write_frame(timing_summary(result.timings), paths['timing'], header)
    if not result.replicates.empty:
        paths['report'] = out_dir / 'report.csv'
        report = aggregate(
            result.replicates,
            methods=config.bench.methods,
            outcomes=[spec.name for spec in config.outcome_schema()],
        )
        report.to_csv(paths['report'], header_comment=header)
    if result.failures:
        paths['failures'] = out_dir / 'failures.csv'
        failures = pd.DataFrame(
            [{'replicate': f.replicate, 'message': f.error} for f in result.failures], columns=['replicate', 'message']
        )
        _write_frame(failures, paths['failures'], header)
    paths['manifest'] = write_manifest(result.manifest, out_dir)
    return paths
