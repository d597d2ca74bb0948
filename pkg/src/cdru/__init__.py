"""Consumption-dependent random utility: menu invariance, joint choice axioms and consistency tests."""

from .errors import (
    CdruError,
    DegenerateDenominator,
    IncompleteDomain,
    InternalBreach,
    NotErgodic,
    NotRepresentable,
    RankDeficient,
    ValidationError,
)
from .lattice import AlternativeSet, mobius, order_space, zeta
from .dynamics import (
    ArrivalFunction,
    TransitionFunction,
    menu_chain,
    stationary,
    time_average_rcr,
)
from .jointchoice import ChoiceRule, decompose, forward_rule, verify_representation
from .invariance import is_menu_invariant_direct, no_investment_test, equivalence_check
from .hypotest import count_E_rows, count_F_rows, test_extreme, test_mobius

__version__ = "0.1.0"
