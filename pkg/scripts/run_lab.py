# scripts/run_lab.py
import sys

from kawahara_lab.simulation import main

if __name__ == "__main__":
    sys.exit(main())
