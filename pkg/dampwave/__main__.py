import sys

from dampwave.main import main

sys.exit(main())
