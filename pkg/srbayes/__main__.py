# Copyright (C) 2026, srbayes contributors.

# This program is licensed under the Apache License version 2.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0.txt> for full license details.

import sys

from srbayes.cli import main

sys.exit(main())
