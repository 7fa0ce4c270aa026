import sys

from lossycacc.cli import main

sys.exit(main())
