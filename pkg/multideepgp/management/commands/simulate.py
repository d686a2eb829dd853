from multideepgp.bench import build_manifest, simulate_replicate, write_manifest
from multideepgp.datagen import write_dataset_csv
from multideepgp.management.base import MultiDeepGPCommand


class Command(MultiDeepGPCommand):
    help = 'Simulate replicate datasets and write train.csv/test.csv pairs plus a manifest.'
    output_name = 'simulate'

    def add_arguments(self, parser):
        self.add_config_argument(parser)
        parser.add_argument('--seed', type=int, default=None, help='Master seed (overrides bench.seed).')
        parser.add_argument('--replicates', type=int, default=None, help='Number of replicates (overrides bench.replicates).')
        self.add_out_argument(parser)

    def run(self, **options):
        config = self.load_config(
            options['config'],
            {'bench.seed': options['seed'], 'bench.replicates': options['replicates']},
        )
        out = self.output_dir(options['out'])
        header = config.header()
        entries = []
        for r in range(config.bench.replicates):
            train, test, streams = simulate_replicate(config, r)
            folder = out / f'replicate_{r:03d}'
            write_dataset_csv(train, folder / 'train.csv', header)
            write_dataset_csv(test, folder / 'test.csv', header)
            entries.append({'replicate': r, 'train_size': train.n, 'test_size': test.n, 'streams': streams})
            if self.verbosity > 1:
                self.stdout.write(f'replicate {r}: {train.n} train / {test.n} test')
        write_manifest(build_manifest(config, entries), out)
        self.success(f'Wrote {len(entries)} replicate pair(s) to {out}')
