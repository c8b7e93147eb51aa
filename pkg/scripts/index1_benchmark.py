"""Structured index-1 Sylvester solve against eliminate-then-solve.

Writes ``benchmark.csv`` (n1, n2, t_dense_path, t_sparse_path) into
``--out`` and prints the time ratios. Same as ``flmor benchmark``.
"""

import sys

from flmor.cli import main

if __name__ == "__main__":
    sys.exit(main(["benchmark", *sys.argv[1:]]))
