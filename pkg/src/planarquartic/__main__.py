"""Module entry point for `python -m planarquartic`."""

import sys

from .cli import main

sys.exit(main())
