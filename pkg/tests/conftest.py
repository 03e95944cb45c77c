import numpy as np
import pytest
from hypothesis import strategies as st

from renorm_skew.analysis import Analysis, golden, silver_d2
from renorm_skew.blocks import Cocycle, Instance, Renormalization
from renorm_skew.surd import Surd

# quadratic irrationals in (0, 1) used by property tests
ALPHAS = [
    Surd(-1, 1, 2, 5),
    Surd(-1, 1, 1, 2),
    Surd(-1, 1, 1, 3),
    Surd(-2, 1, 1, 7),
    Surd(-3, 1, 2, 13),
    Surd(5, -1, 3, 11),
]


@st.composite
def instances(draw, max_Q: int = 4, max_d: int = 2):
    alpha = draw(st.sampled_from(ALPHAS))
    Q = draw(st.integers(2, max_Q))
    d = draw(st.integers(1, max_d))
    head = draw(
        st.lists(st.lists(st.integers(-3, 3), min_size=d, max_size=d), min_size=Q - 1, max_size=Q - 1)
    )
    Phi = np.array(head + [[-sum(col) for col in zip(*head)]], dtype=np.int64)
    return Instance(alpha, Cocycle(Phi))


@pytest.fixture(scope="session")
def inst_a() -> Instance:
    return golden()


@pytest.fixture(scope="session")
def inst_b() -> Instance:
    return silver_d2()


@pytest.fixture(scope="session")
def ren_a(inst_a) -> Renormalization:
    return Renormalization(inst_a)


@pytest.fixture(scope="session")
def ren_b(inst_b) -> Renormalization:
    return Renormalization(inst_b)


@pytest.fixture(scope="session")
def an_a(inst_a) -> Analysis:
    return Analysis(inst_a)


@pytest.fixture(scope="session")
def an_b(inst_b) -> Analysis:
    return Analysis(inst_b)


@pytest.fixture(scope="session", params=["A", "B"])
def analysis(request, an_a, an_b) -> Analysis:
    return an_a if request.param == "A" else an_b
