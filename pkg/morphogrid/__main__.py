import sys

from morphogrid.main import main

sys.exit(main())
