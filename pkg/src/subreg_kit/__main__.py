import sys

from subreg_kit.cli import main

sys.exit(main())
