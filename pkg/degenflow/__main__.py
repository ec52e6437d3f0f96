import sys

from degenflow.cli import main

sys.exit(main())
