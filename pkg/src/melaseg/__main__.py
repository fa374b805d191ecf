import sys

from melaseg.cli import main

sys.exit(main())
