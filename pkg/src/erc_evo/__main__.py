import sys

from erc_evo.cli import main

sys.exit(main())
