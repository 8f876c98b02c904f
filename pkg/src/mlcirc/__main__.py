import sys

from mlcirc.cli import main

sys.exit(main())
