from django.conf import settings
from django.core.management.base import CommandError
from django.db import transaction
from django.utils import timezone

from multideepgp.bench import run_bench, write_bench_outputs
from multideepgp.management.base import MultiDeepGPCommand
from multideepgp.models import BenchmarkRun, ReplicateFailure, ReplicateMetric
from multideepgp.runconfig import read_flat


class Command(MultiDeepGPCommand):
    help = 'Run the replicate benchmark: simulate, split, fit, predict and score every enabled method.'
    output_name = 'bench'

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument('--seed', type=int, default=None, help='Master seed (overrides bench.seed).')
        parser.add_argument('--replicates', type=int, default=None, help='Replicate count (overrides bench.replicates).')
        parser.add_argument('--workers', type=int, default=None, help='Worker processes (overrides bench.workers).')
        parser.add_argument(
            '--methods', default=None,
            help='Comma-separated subset of multideepgp,multidnn,kriging (overrides bench.methods).',
        )
        parser.add_argument('--no-ledger', dest='no_ledger', action='store_true', help='Do not record the run in the database.')
        self.add_out_argument(parser)

    def run(self, **options):
        workers = options['workers']
        if workers is None and 'bench.workers' not in self._config_keys(options['config']):
            workers = settings.MULTIDEEPGP['WORKERS']
        config = self.load_config(
            options['config'],
            {
                'bench.seed': options['seed'],
                'bench.replicates': options['replicates'],
                'bench.workers': workers,
                'bench.methods': options['methods'],
            },
        )
        out = self.output_dir(options['out'])
        run = None if options['no_ledger'] else self._open_run(config, out)

        result = run_bench(config)
        paths = write_bench_outputs(config, result, out)
        if run is not None:
            self._close_run(run, result)

        if 'report' in paths:
            self.stdout.write(paths['report'].read_text(encoding='utf-8'))
        if not result.ok:
            for failure in result.failures:
                self.stderr.write(self.style.ERROR(f'replicate {failure.replicate}: {failure.error}'))
            raise CommandError(
                f"{len(result.failures)} of {config.bench.replicates} replicate(s) failed; see {out / 'failures.csv'}"
            )
        self.success(f'Benchmark of {config.bench.replicates} replicate(s) written to {out}')

    @staticmethod
    def _config_keys(path) -> set:
        return set(read_flat(path)) if path else set()

    def _open_run(self, config, out) -> BenchmarkRun:
        return BenchmarkRun.objects.create(
            config_hash=config.config_hash,
            master_seed=config.bench.seed,
            data_source=config.data.source,
            methods=list(config.bench.methods),
            replicates=config.bench.replicates,
            workers=config.bench.workers,
            output_dir=str(out),
        )

    @transaction.atomic
    def _close_run(self, run: BenchmarkRun, result) -> None:
        ReplicateMetric.objects.bulk_create(
            ReplicateMetric(
                run=run,
                replicate=int(row.replicate),
                method=row.method,
                outcome=row.outcome,
                metric=row.metric,
                value=float(row.value),
            )
            for row in result.replicates.itertuples(index=False)
        )
        ReplicateFailure.objects.bulk_create(
            ReplicateFailure(run=run, replicate=f.replicate, message=f.error) for f in result.failures
        )
        run.status = 'completed' if result.ok else 'failed'
        run.finished_at = timezone.now()
        run.save(update_fields=['status', 'finished_at'])
