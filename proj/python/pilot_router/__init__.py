"""Budget-constrained contextual-bandit LLM routing.

Thin python facade over the C++ core: preference pretraining, the PILOT
router and baseline policies, the per-bin knapsack cost policy, offline
replay, and the synthetic linear-bandit regret validator.
"""

from ._pilot_router import *  # noqa: F401,F403
from ._pilot_router import __version__  # noqa: F401
