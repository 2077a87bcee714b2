import pytest
from hypothesis import strategies as st

from crrkit.model import PopulationModel
from crrkit.verify import TOY_MODEL


@pytest.fixture
def toy_model() -> PopulationModel:
    return TOY_MODEL


def _build_model(parts, p_d, mu_01, mu_11) -> PopulationModel:
    total = sum(parts)
    pi = [p / total for p in parts]
    return PopulationModel(
        p_d=p_d,
        pi_al=pi[0],
        pi_mi=pi[1],
        pi_ma=pi[2],
        pi_ne=1.0 - pi[0] - pi[1] - pi[2],
        mu_01=mu_01,
        mu_11=mu_11,
    )


unit = st.floats(0.0, 1.0, allow_nan=False, allow_infinity=False)
positive_part = st.floats(0.01, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def models(draw) -> PopulationModel:
    """Arbitrary valid population models, covering the whole parameter space."""
    parts = draw(st.lists(positive_part, min_size=4, max_size=4))
    return _build_model(parts, draw(unit), draw(unit), draw(unit))


@st.composite
def monotone_models(draw) -> PopulationModel:
    """Models with pi_ma = 0 (nobody is stopped only when majority)."""
    al, mi, ne = (draw(positive_part) for _ in range(3))
    total = al + mi + ne
    pi_al, pi_mi = al / total, mi / total
    mu_01 = draw(st.floats(0.01, 1.0, allow_nan=False))
    return PopulationModel(
        p_d=draw(unit),
        pi_al=pi_al,
        pi_mi=pi_mi,
        pi_ma=0.0,
        pi_ne=1.0 - pi_al - pi_mi,
        mu_01=mu_01,
        mu_11=draw(unit),
    )
