import sys

from toucontract.cli import main

sys.exit(main())
