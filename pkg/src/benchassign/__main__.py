import sys

from benchassign.cli import main

sys.exit(main())
