from multideepgp.checkpoint import load_checkpoint
from multideepgp.datagen import read_csv_dataset
from multideepgp.exceptions import ConfigHashMismatch
from multideepgp.management.base import MultiDeepGPCommand
from multideepgp.predict import composite_score, idw_grid, predict


class Command(MultiDeepGPCommand):
    help = 'MC-dropout predictions (mean, interval, sd) at the locations of a CSV.'
    output_name = 'predict'

    def add_arguments(self, parser):
        parser.add_argument('--checkpoint', required=True, help='checkpoint.npz written by the train command.')
        parser.add_argument('--locations', required=True, help='CSV with the coordinate (and covariate) columns.')
        self.add_config_argument(parser)
        parser.add_argument('--level', type=float, default=None, help='Interval level (overrides predict.level).')
        parser.add_argument('--m-draws', dest='m_draws', type=int, default=None, help='MC draws (overrides predict.m_draws).')
        parser.add_argument('--seed', type=int, default=None, help='Prediction seed (overrides predict.seed).')
        parser.add_argument(
            '--composite-grid', dest='composite_grid', type=int, default=None,
            help='Also write an N x N inverse-distance-weighted composite-score grid.',
        )
        self.add_out_argument(parser)

    def run(self, **options):
        config = self.load_config(
            options['config'],
            {
                'predict.level': options['level'],
                'predict.m_draws': options['m_draws'],
                'predict.seed': options['seed'],
            },
        )
        model = load_checkpoint(options['checkpoint'])
        if model.model_hash != config.model_hash:
            raise ConfigHashMismatch(model.model_hash, config.model_hash)

        out = self.output_dir(options['out'])
        locations = read_csv_dataset(
            options['locations'], (), config.coord_columns(), config.covariate_columns()
        )
        prediction = predict(
            model, locations.coords, locations.features, config.predict, coord_names=locations.coord_names
        )
        prediction.to_csv(out / 'predictions.csv', header_comment=config.header())
        self.success(f"Wrote {locations.n} x {len(model.heads)} predictions to {out / 'predictions.csv'}")

        if options['composite_grid']:
            score = composite_score(prediction.mean)
            grid = idw_grid(locations.coords, score, options['composite_grid'])
            path = out / 'composite_grid.csv'
            with open(path, 'w', encoding='utf-8', newline='') as fh:
                fh.write(f'# {config.header()} interpolation=idw power=2 k=12\n')
                grid.to_csv(fh, index=False, lineterminator='\n')
            self.success(f'Wrote {len(grid)} composite-score grid cells to {path}')
