import sys

from keyflood.cli import main

sys.exit(main())
