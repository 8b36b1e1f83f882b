import sys

from decometry.cli import main

sys.exit(main())
