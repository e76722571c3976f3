"""Acceptance criteria 1-10, one pass/fail line each.

Run under pytest (lines are collected and printed in the terminal summary)
or directly: ``python tests/test_acceptance.py [numbers...]``.
"""
import sys
import time

import pytest

from halfstokes import suites as S

CRITERIA = {
    1: ("kernel identities", S.criterion_kernel_identities),
    2: ("weight Laplacian bound", S.criterion_weight_laplacian),
    3: ("Muckenhoupt audit", S.criterion_muckenhoupt),
    4: ("half-space boundary trace", S.criterion_trace),
    5: ("evaluator vs projection stepper", S.criterion_oracle),
    6: ("decay rates", S.criterion_decay),
    7: ("weighted semigroup bounds", S.criterion_semigroup_bounds),
    8: ("strong continuity at t = 0", S.criterion_continuity),
    9: ("Helmholtz decomposition", S.criterion_helmholtz),
    10: ("interpolation inequality", S.criterion_interpolation),
}


def run_criterion(k: int):
    name, fn = CRITERIA[k]
    t0 = time.perf_counter()
    checks, _ = fn()
    dt = time.perf_counter() - t0
    failed = [c.check for c in checks if not c.passed]
    status = "PASS" if not failed else "FAIL"
    line = f"criterion {k:2d} {status}  {name} ({len(checks) - len(failed)}/{len(checks)} checks, {dt:.1f} s)"
    if failed:
        line += "  failing: " + ", ".join(failed)
    return line, checks, failed


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    from conftest import ACCEPTANCE_LINES

    line, checks, failed = run_criterion(k)
    ACCEPTANCE_LINES[k] = line
    print(line)
    for c in checks:
        r = c.row()
        print(f"  {'ok  ' if c.passed else 'FAIL'} {r['check']}: measured {r['measured']}, "
              f"predicted {r['predicted']}, tol {r['tolerance']}")
    assert checks and not failed, line


if __name__ == "__main__":
    ks = [int(a) for a in sys.argv[1:]] or sorted(CRITERIA)
    bad = 0
    for k in ks:
        line, _, failed = run_criterion(k)
        print(line, flush=True)
        bad += bool(failed)
    sys.exit(1 if bad else 0)
