import sys
from lighterx.cli import main

sys.exit(main())
