import sys

from navicat_hgate.hgate import run_hgate

if __name__ == "__main__":
    sys.exit(run_hgate())
