import sys

from rcp1.cli import main

sys.exit(main())
