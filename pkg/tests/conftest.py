import numpy as np

from stablefield.actions import FiniteCocycle, FiniteDiscrete, RosinskiTriplet, TRIVIAL
from stablefield.sas_core import FiniteWeightedSpace


def random_finite_triplet(rng, max_atoms=12, max_d=2, alpha=None, signed=True):
    """Random full-support FiniteDiscrete triplet.

    Generators are powers of one random permutation, so they commute.  The
    cocycle is a character times a coboundary ``b(s) b(phi_t s)``, which
    always satisfies the cocycle identity.
    """
    n = int(rng.integers(1, max_atoms + 1))
    d = int(rng.integers(1, max_d + 1))
    alpha = float(rng.uniform(0.2, 1.9)) if alpha is None else alpha
    base = rng.permutation(n)
    gens = []
    for _ in range(d):
        g = np.arange(n)
        for _ in range(int(rng.integers(0, 4))):
            g = base[g]
        gens.append(g)
    weights = rng.uniform(0.1, 5.0, n)
    space = FiniteWeightedSpace([f"s{i}" for i in range(n)], weights)
    fam = FiniteDiscrete(space, gens)
    kernel = rng.normal(size=n) * (rng.random(n) < 0.7)
    for orbit in fam.orbits():
        if not np.any(kernel[list(orbit)]):
            kernel[orbit[0]] = 1.0
    cocycle = TRIVIAL
    if signed and rng.random() < 0.7:
        b = rng.choice([-1.0, 1.0], n)
        chi = rng.choice([-1.0, 1.0], d)
        signs = [chi[k] * b * b[g] for k, g in enumerate(gens)]
        cocycle = FiniteCocycle(fam, signs)
    return RosinskiTriplet(fam, kernel, alpha, cocycle)


# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
