import numpy as np
import pytest

from slowvary import OperatorFamily, enumerate_indices
from slowvary.models import random_walker_modal, random_walker_physical


@pytest.fixture(scope="session")
def walker():
    return random_walker_modal()


@pytest.fixture(scope="session")
def walker_exact():
    return random_walker_modal(exact=True)


@pytest.fixture(scope="session")
def walker_physical():
    return random_walker_physical()


def random_gap_family(
    rng,
    dimU: int = 4,
    M: int = 2,
    m: int = 1,
    max_order: int = 2,
    centre: str = "zero",
) -> OperatorFamily:
    """Random operator family with an exact m-dimensional centre and gap >= 1.

    The base operator is built orthogonally similar to a block-diagonal
    matrix whose centre block has zero real part and whose stable part has
    real parts in [-4, -1], so the split assumptions hold by construction.
    ``centre`` picks the centre block: "zero" (semisimple), "jordan"
    (nilpotent chain), or "rotation" (imaginary pair, needs m = 2).
    """
    if centre == "zero":
        C = np.zeros((m, m))
    elif centre == "jordan":
        C = np.diag(np.ones(m - 1), 1)
    elif centre == "rotation":
        assert m == 2
        w = 0.5 + rng.random()
        C = np.array([[0.0, w], [-w, 0.0]])
    else:
        raise ValueError(centre)
    B = np.zeros((dimU, dimU))
    B[:m, :m] = C
    i = m
    while i < dimU:
        a = -1.0 - 3.0 * rng.random()
        if i + 1 < dimU and rng.random() < 0.5:
            b = 0.5 + rng.random()
            B[i : i + 2, i : i + 2] = [[a, b], [-b, a]]
            i += 2
        else:
            B[i, i] = a
            i += 1
    Q = np.linalg.qr(rng.standard_normal((dimU, dimU)))[0]
    ops = {(0,) * M: Q @ B @ Q.T}
    for k in enumerate_indices(M, max_order):
        if sum(k) == 0:
            continue
        ops[k] = rng.standard_normal((dimU, dimU)) / (1.0 + sum(k))
    return OperatorFamily(ops)
