import sys

from blocktrack.cli import main

sys.exit(main())
