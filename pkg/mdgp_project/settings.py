"""
Django settings for the mdgp_project project.

The project hosts a single app, ``multideepgp``: the numerical library, its
management commands and a small ledger of benchmark runs. Everything that
varies between machines is read from the environment (optionally via a
``.env`` file).
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file
load_dotenv()

# No request handling happens here; the key only satisfies Django's checks.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'django-insecure-mdgp-local-only')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'multideepgp',
]

MIDDLEWARE = []


# Database

DATABASES = {
    'default': {
        'ENGINE': os.getenv('DB_ENGINE', 'django.db.backends.sqlite3'),
        'NAME': os.getenv('DB_NAME', str(BASE_DIR / 'mdgp.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# MultiDeepGP

MULTIDEEPGP = {
    'OUTPUT_DIR': os.getenv('MDGP_OUTPUT_DIR', str(BASE_DIR / 'runs')),
    'WORKERS': int(os.getenv('MDGP_WORKERS', '1')),
    'LOG_LEVEL': os.getenv('MDGP_LOG_LEVEL', 'INFO'),
}

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'multideepgp': {
            'handlers': ['console'],
            'level': MULTIDEEPGP['LOG_LEVEL'],
            'propagate': False,
        },
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}
