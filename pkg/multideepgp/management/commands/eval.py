import numpy as np
from django.core.management.base import CommandError

from multideepgp.exceptions import DimensionMismatch
from multideepgp.management.base import MultiDeepGPCommand
from multideepgp.metrics import (
    aggregate,
    read_prediction_csv,
    read_replicate_csv,
    replicate_frame,
    score_prediction,
)
from multideepgp.predict import Prediction


class Command(MultiDeepGPCommand):
    help = 'Score a predictions CSV against held-out truth, or re-aggregate a replicates CSV into a report.'
    output_name = 'eval'

    def add_arguments(self, parser):
        parser.add_argument('--predictions', default=None, help='predictions.csv written by the predict command.')
        parser.add_argument('--truth', default=None, help='Dataset CSV holding the observed outcomes.')
        parser.add_argument('--method', default='multideepgp', help='Method label for the scored predictions.')
        parser.add_argument('--replicates', default=None, help='replicates.csv written by the bench command.')
        self.add_config_argument(parser)
        self.add_out_argument(parser)

    def run(self, **options):
        if options['replicates']:
            if options['predictions'] or options['truth']:
                raise CommandError('--replicates cannot be combined with --predictions/--truth.')
            self._reaggregate(options)
        elif options['predictions'] and options['truth']:
            self._score(options)
        else:
            raise CommandError('Pass either --predictions with --truth, or --replicates.')

    def _score(self, options):
        config = self.load_config(options['config'])
        truth = config.read_dataset(options['truth'])
        prediction = self._prediction_from_csv(options['predictions'], truth)

        rows = [
            {'replicate': 0, 'method': options['method'], 'outcome': outcome, 'metric': metric, 'value': value}
            for (outcome, metric), value in score_prediction(prediction, truth.responses).items()
        ]
        out = self.output_dir(options['out'])
        scores = replicate_frame(rows)
        with open(out / 'scores.csv', 'w', encoding='utf-8', newline='') as fh:
            fh.write(f'# {config.header()}\n')
            scores.to_csv(fh, index=False, lineterminator='\n')
        report = aggregate(scores, methods=[options['method']], outcomes=truth.outcome_names)
        report.to_csv(out / 'report.csv', header_comment=config.header())
        self.stdout.write(report.to_table().to_string(index=False))
        self.success(f"Scored {truth.n} rows x {len(truth.outcomes)} outcomes; report in {out / 'report.csv'}")

    @staticmethod
    def _prediction_from_csv(path, truth) -> Prediction:
        frame = read_prediction_csv(path)
        missing = {'row', 'outcome', 'mean', 'lo', 'hi', 'sd'} - set(frame.columns)
        if missing:
            raise CommandError(f"{path}: missing column(s) {', '.join(sorted(missing))}.")
        names = truth.outcome_names
        unknown = set(frame['outcome']) - set(names)
        if unknown:
            raise DimensionMismatch(f'Predictions name outcome(s) {sorted(unknown)} absent from the truth schema.')

        wide = frame.pivot(index='row', columns='outcome', values=['mean', 'lo', 'hi', 'sd'])
        if len(wide) != truth.n or not np.array_equal(wide.index.to_numpy(), np.arange(truth.n)):
            raise DimensionMismatch(f'Predictions cover {len(wide)} rows; the truth dataset has {truth.n}.')

        def table(value: str) -> np.ndarray:
            return wide[value].reindex(columns=names).to_numpy(dtype=float)

        return Prediction(
            coords=truth.coords,
            outcomes=tuple(truth.outcomes),
            mean=table('mean'),
            lo=table('lo'),
            hi=table('hi'),
            sd=table('sd'),
            coord_names=tuple(truth.coord_names),
        )

    def _reaggregate(self, options):
        config = self.load_config(options['config']) if options['config'] else None
        replicates = read_replicate_csv(options['replicates'])
        methods = outcomes = None
        if config is not None:
            methods = [m for m in config.bench.methods if m in set(replicates['method'])]
            outcomes = [spec.name for spec in config.outcome_schema()]
        report = aggregate(replicates, methods=methods, outcomes=outcomes)
        out = self.output_dir(options['out'])
        header = config.header() if config is not None else None
        report.to_csv(out / 'report.csv', header_comment=header)
        self.stdout.write(report.to_table().to_string(index=False))
        self.success(
            f"Aggregated {replicates['replicate'].nunique()} replicate(s) of {len(report.methods)} method(s) "
            f"into {out / 'report.csv'}"
        )
