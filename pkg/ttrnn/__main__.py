import sys

from ttrnn.cli import main

sys.exit(main())
