# src/qpplab/__main__.py
import sys

from qpplab.main import main

sys.exit(main())
