import sys

from lpmink.main import main

sys.exit(main())
