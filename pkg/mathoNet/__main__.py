import sys

from mathoNet.commands import main

sys.exit(main())
