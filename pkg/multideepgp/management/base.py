"""Shared plumbing for the multideepgp management commands."""
from __future__ import annotations

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ..exceptions import ConfigError, MultiDeepGPError
from ..runconfig import RunConfig, load_run_config

logger = logging.getLogger('multideepgp.commands')


class MultiDeepGPCommand(BaseCommand):
    """Subclasses implement ``run``; domain errors become ``CommandError``."""

    #: Default sub-directory of ``MULTIDEEPGP['OUTPUT_DIR']`` used when ``--out`` is omitted.
    output_name = ''
    verbosity = 1

    def add_config_argument(self, parser, required: bool = False):
        parser.add_argument(
            '--config', dest='config', default=None, required=required,
            help='Run configuration file (key=value lines with dotted keys).',
        )

    def add_out_argument(self, parser):
        parser.add_argument('--out', dest='out', default=None, help='Output directory.')

    def handle(self, *args, **options):
        self.verbosity = options.get('verbosity', 1)
        try:
            self.run(**options)
        except ConfigError as exc:
            raise CommandError(str(exc)) from exc
        except (MultiDeepGPError, ValueError, OSError) as exc:
            raise CommandError(f'{type(exc).__name__}: {exc}') from exc

    def run(self, **options):
        raise NotImplementedError

    def load_config(self, path, overrides: dict | None = None) -> RunConfig:
        config = load_run_config(path, overrides)
        if self.verbosity > 1:
            self.stdout.write(f"Config {path or '<defaults>'} hash {config.config_hash[:12]}")
        return config

    def output_dir(self, out) -> Path:
        path = Path(out) if out else Path(settings.MULTIDEEPGP['OUTPUT_DIR']) / self.output_name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def success(self, message: str):
        self.stdout.write(self.style.SUCCESS(message))
