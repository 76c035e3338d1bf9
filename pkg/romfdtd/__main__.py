import sys

from romfdtd.cli import main

sys.exit(main())
