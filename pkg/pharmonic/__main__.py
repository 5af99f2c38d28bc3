import sys

from pharmonic.cli import main

sys.exit(main())
