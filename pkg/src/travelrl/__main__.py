from __future__ import annotations

import sys

from travelrl.cli import main

sys.exit(main())
