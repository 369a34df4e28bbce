"""Entry point for ``python -m runner``."""

import sys

from .cli import main

sys.exit(main())
