__version__ = '0.1.0'

from .app import create_cli, parse_and_dispatch  # noqa: E402
