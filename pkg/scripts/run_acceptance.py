"""Run the acceptance criteria and print one line each.

usage: python3 scripts/run_acceptance.py [N ...]
"""

import sys

from threadpoolctl import threadpool_limits

from edge_spectral_lab.acceptance import run_all


def main(argv):
    numbers = {int(a) for a in argv} or None
    with threadpool_limits(limits=1):
        results = run_all(numbers)
    failed = [r for r in results if not r.passed and not r.warning_only]
    print(f"{len(results) - len(failed)}/{len(results)} criteria pass")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
