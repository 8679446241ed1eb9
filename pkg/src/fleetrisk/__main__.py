import sys

from fleetrisk.cli import main

sys.exit(main())
