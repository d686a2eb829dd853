# Generated by Django 4.2.25 on 2026-10-18 09:00

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='BenchmarkRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_hash', models.CharField(max_length=64, verbose_name='config hash')),
                ('master_seed', models.DecimalField(decimal_places=0, help_text='Unsigned 64-bit seed every replicate stream is split from', max_digits=20, verbose_name='master seed')),
                ('data_source', models.CharField(max_length=20, verbose_name='data source')),
                ('methods', models.JSONField(blank=True, default=list, verbose_name='methods')),
                ('replicates', models.PositiveIntegerField(verbose_name='replicates')),
                ('workers', models.PositiveIntegerField(default=1, verbose_name='workers')),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'), ('failed', 'Completed with failures')], default='running', max_length=20, verbose_name='status')),
                ('output_dir', models.CharField(blank=True, max_length=500, verbose_name='output directory')),
                ('started_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'verbose_name': 'benchmark run',
                'verbose_name_plural': 'benchmark runs',
                'ordering': ['-started_at'],
                'indexes': [models.Index(fields=['config_hash'], name='mdgp_run_config_hash_idx'), models.Index(fields=['started_at'], name='mdgp_run_started_at_idx')],
            },
        ),
        migrations.CreateModel(
            name='ReplicateFailure',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('replicate', models.PositiveIntegerField(verbose_name='replicate')),
                ('message', models.TextField(verbose_name='message')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='failures', to='multideepgp.benchmarkrun', verbose_name='run')),
            ],
            options={
                'verbose_name': 'replicate failure',
                'verbose_name_plural': 'replicate failures',
                'ordering': ['run', 'replicate'],
            },
        ),
        migrations.CreateModel(
            name='ReplicateMetric',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('replicate', models.PositiveIntegerField(verbose_name='replicate')),
                ('method', models.CharField(max_length=20, verbose_name='method')),
                ('outcome', models.CharField(max_length=100, verbose_name='outcome')),
                ('metric', models.CharField(max_length=20, verbose_name='metric')),
                ('value', models.FloatField(verbose_name='value')),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='metrics', to='multideepgp.benchmarkrun', verbose_name='run')),
            ],
            options={
                'verbose_name': 'replicate metric',
                'verbose_name_plural': 'replicate metrics',
                'ordering': ['run', 'replicate', 'method', 'outcome', 'metric'],
                'indexes': [models.Index(fields=['run', 'method'], name='mdgp_metric_run_method_idx')],
            },
        ),
        migrations.AddConstraint(
            model_name='replicatemetric',
            constraint=models.UniqueConstraint(fields=('run', 'replicate', 'method', 'outcome', 'metric'), name='mdgp_unique_replicate_metric'),
        ),
    ]
