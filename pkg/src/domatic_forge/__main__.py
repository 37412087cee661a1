import sys

from .cli_reporting.cli import main

if __name__ == "__main__":
    sys.exit(main())
