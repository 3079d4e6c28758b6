import sys

from sepquant.cli import main

sys.exit(main())
