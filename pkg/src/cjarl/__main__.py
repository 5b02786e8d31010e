import sys

from cjarl.cli import main

sys.exit(main())
