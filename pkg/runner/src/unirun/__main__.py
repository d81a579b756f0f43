import sys

from .shim import main

if __name__ == "__main__":
    sys.exit(main())
