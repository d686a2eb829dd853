from django.core.management.base import CommandError

from multideepgp.checkpoint import save_checkpoint
from multideepgp.exceptions import DivergenceError
from multideepgp.management.base import MultiDeepGPCommand
from multideepgp.training import fit


class Command(MultiDeepGPCommand):
    help = 'Train a MultiDeepGP network on a dataset CSV and write a checkpoint and loss report.'
    output_name = 'train'

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument('--dataset', required=True, help='Training CSV (coordinates, covariates, outcomes).')
        parser.add_argument('--seed', type=int, default=None, help='Training seed (overrides train.seed).')
        self.add_out_argument(parser)

    def run(self, **options):
        config = self.load_config(options['config'], {'train.seed': options['seed']})
        out = self.output_dir(options['out'])
        train = config.read_dataset(options['dataset'])
        embedding = config.embedding(train.coords)
        net = config.network(embedding.output_dim(train.coords.shape[1]), train.n, train.covariate_dim)

        try:
            model, report = fit(train, net, config.train, embedding, model_hash=config.model_hash)
        except DivergenceError as exc:
            raise CommandError(
                f'Training diverged: {exc} Try a smaller train.learning_rate or a tighter train.gradient_clip.'
            ) from exc

        save_checkpoint(model, out / 'checkpoint.npz')
        report.to_csv(out / 'train_report.csv', header_comment=config.header())
        if embedding.knots is not None:
            embedding.knots.to_csv(out / 'knots.csv')
        self.success(
            f'Trained {len(report.losses)} epochs on {train.n} rows in {report.seconds:.1f}s '
            f'(final loss {report.final_loss:.4f}); checkpoint in {out}'
        )
