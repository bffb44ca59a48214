
import pytest
from hypothesis import settings, strategies as st

from hkrenorm.trees import Tree, enumerate_forests, enumerate_trees

settings.register_profile("repo", max_examples=60, deadline=None)
settings.load_profile("repo")

TREES4 = enumerate_trees(4, 1)
FORESTS4 = enumerate_forests(4, 1)
FORESTS3 = enumerate_forests(3, 1)

trees = st.sampled_from(TREES4)
forests = st.sampled_from(FORESTS4)
small_forests = st.sampled_from(FORESTS3)
rationals = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def random_trees(draw, max_size=6, d=2):
    """Trees grown node by node: node k attaches to a random earlier node."""
    n = draw(st.integers(1, max_size))
    decs = [draw(st.integers(0, d)) for _ in range(n)]
    parents = [None] + [draw(st.integers(0, k - 1)) for k in range(1, n)]

    def build(v):
        return Tree(decs[v], [build(c) for c in range(n) if parents[c] == v])

    return build(0)


@pytest.fixture(scope="session")
def exact_suite_cfg():
    from hkrenorm.suites import SuiteConfig

    return SuiteConfig()
