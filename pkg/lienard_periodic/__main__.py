"""Allow ``python -m lienard_periodic``."""

import sys

from .cli import main

sys.exit(main())
