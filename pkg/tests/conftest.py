import numpy as np
import pytest

from avatarkit.mesh import TriMesh
from avatarkit.templates import body_template


def tetrahedron():
    """Unit-ish regular tetrahedron centered at the origin, outward CCW faces."""
    v = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    )
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(v, f)


@pytest.fixture
def tetra():
    return tetrahedron()


@pytest.fixture(scope="session")
def template():
    return body_template()


@pytest.fixture(scope="session")
def sphere():
    return body_template(slices=40, stacks=39, radii=(0.5, 0.5, 0.5))
