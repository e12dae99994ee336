import sys

from nlsgi.cli import main

sys.exit(main())
