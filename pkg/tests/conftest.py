import numpy as np
import pytest

from pqlab.pseudometric import make_frame
from pqlab.qlinalg import QSpace
from pqlab.repbuilder import deform, reference_representation


@pytest.fixture(scope="session")
def space22():
    return QSpace(2, 2)


@pytest.fixture(scope="session")
def ref_rep():
    return reference_representation()


@pytest.fixture(scope="session")
def ref_frame(space22):
    return make_frame(space22, space22.basis(3))


@pytest.fixture(scope="session")
def bent_rep(ref_rep):
    # leaves the embedded H^2, so b_tau and b_o differ
    return deform(ref_rep, 0.05, seed=1)


@pytest.fixture(scope="session")
def q1_rep():
    return reference_representation(QSpace(2, 1))


@pytest.fixture(scope="session")
def q1_frame(q1_rep):
    sp = q1_rep.space
    return make_frame(sp, sp.basis(3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_group_element(space, rng, scale=1.0):
    from scipy.linalg import expm
    from pqlab.qlinalg import lie_algebra_element
    return expm(scale * lie_algebra_element(space, rng.standard_normal((space.d, space.d))))


@pytest.fixture
def group_element():
    return random_group_element
