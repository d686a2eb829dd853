from __future__ import annotations

from django.db import models
from django.utils.translation import gettext_lazy as _


class BenchmarkRun(models.Model):
    RUN_STATUS = [
        ('running', _('Running')),
        ('completed', _('Completed')),
        ('failed', _('Completed with failures')),
    ]

    config_hash = models.CharField(_('config hash'), max_length=64)
    master_seed = models.DecimalField(
        _('master seed'), max_digits=20, decimal_places=0,
        help_text=_('Unsigned 64-bit seed every replicate stream is split from'),
    )
    data_source = models.CharField(_('data source'), max_length=20)
    methods = models.JSONField(_('methods'), default=list, blank=True)
    replicates = models.PositiveIntegerField(_('replicates'))
    workers = models.PositiveIntegerField(_('workers'), default=1)
    status = models.CharField(_('status'), max_length=20, choices=RUN_STATUS, default='running')
    output_dir = models.CharField(_('output directory'), max_length=500, blank=True)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        verbose_name = _('benchmark run')
        verbose_name_plural = _('benchmark runs')
        ordering = ['-started_at']
        indexes = [
            models.Index(fields=['config_hash'], name='mdgp_run_config_hash_idx'),
            models.Index(fields=['started_at'], name='mdgp_run_started_at_idx'),
        ]

    def __str__(self) -> str:
        return f'{self.data_source} x{self.replicates} ({self.config_hash[:12]}, {self.status})'


class ReplicateMetric(models.Model):
    run = models.ForeignKey(
        BenchmarkRun, on_delete=models.CASCADE, related_name='metrics', verbose_name=_('run')
    )
    replicate = models.PositiveIntegerField(_('replicate'))
    method = models.CharField(_('method'), max_length=20)
    outcome = models.CharField(_('outcome'), max_length=100)
    metric = models.CharField(_('metric'), max_length=20)
    value = models.FloatField(_('value'))

    class Meta:
        verbose_name = _('replicate metric')
        verbose_name_plural = _('replicate metrics')
        ordering = ['run', 'replicate', 'method', 'outcome', 'metric']
        constraints = [
            models.UniqueConstraint(
                fields=['run', 'replicate', 'method', 'outcome', 'metric'], name='mdgp_unique_replicate_metric'
            ),
        ]
        indexes = [
            models.Index(fields=['run', 'method'], name='mdgp_metric_run_method_idx'),
        ]

    def __str__(self) -> str:
        return f'r{self.replicate} {self.method}/{self.outcome} {self.metric}={self.value:.4f}'


class ReplicateFailure(models.Model):
    run = models.ForeignKey(
        BenchmarkRun, on_delete=models.CASCADE, related_name='failures', verbose_name=_('run')
    )
    replicate = models.PositiveIntegerField(_('replicate'))
    message = models.TextField(_('message'))

    class Meta:
        verbose_name = _('replicate failure')
        verbose_name_plural = _('replicate failures')
        ordering = ['run', 'replicate']

    def __str__(self) -> str:
        return f'r{self.replicate}: {self.message[:60]}'
