import sys

from kacspec.cli import main

sys.exit(main())
