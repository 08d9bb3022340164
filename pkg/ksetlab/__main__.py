"""``python -m ksetlab``."""

import sys

from .cli import main

sys.exit(main())
