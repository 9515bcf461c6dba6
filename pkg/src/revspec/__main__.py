import sys

from revspec.cli import main

sys.exit(main())
