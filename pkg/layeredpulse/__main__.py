import sys

from layeredpulse.cli import main

sys.exit(main())
