import sys

from loewnerlab.cli import main

sys.exit(main())
