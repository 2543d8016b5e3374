import sys

from targetzone.cli import main

sys.exit(main())
