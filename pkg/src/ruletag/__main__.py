import sys

from ruletag.cli import main

sys.exit(main())
