from django.apps import AppConfig


class MultiDeepGPConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'multideepgp'
    verbose_name = 'MultiDeepGP'
