"""Shared fixtures-by-value for the form and acceptance tests."""

import numpy as np

from triobs.errors import DomainViolation
from triobs.obsanalysis import SampleBox, Tube
from triobs.observsim import integrate_system

# Example 1 restricted to x3 >= 0.5, where H_3 is a diffeomorphism
EX1_BOX = SampleBox((-1, -1, 0.5), (3, 4.5, 2), (9, 11, 9))
# Example 2 away from x3 = 0 and from the line x1 = x2 = 0
EX2_BOX = SampleBox((-1, -1, 0.5), (3, 4.5, 2), (9, 11, 9), exclude=(Tube((0, 1), 0.3),))

INNER_LO = (0.5, 0.5, 0.8)
INNER_HI = (1.5, 2.0, 1.2)


def trajectories_inside(sys, box, count, *, T=0.5, dt=1e-3, u_range=(-1.0, 0.2), seed=0, max_tries=500):
    """(x0, u) pairs whose constant-input trajectory stays in ``box``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        x0 = rng.uniform(INNER_LO, INNER_HI)
        u = float(rng.uniform(*u_range))
        try:
            tr = integrate_system(sys, x0, u, T, dt, box=box, strict=True)
        except DomainViolation:
            continue
        if not tr.truncated:
            out.append((x0, u))
        if len(out) == count:
            return out
    raise RuntimeError(f"only {len(out)} of {count} trajectories stayed in the box")


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def verdict(number: int, passed: bool, detail: str) -> bool:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    return bool(passed)
