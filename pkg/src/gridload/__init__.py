"""Load analytics for a balancing authority.

Weather-conditioned counterfactual load estimation, demand-anomaly metrics,
forecast scoring and CPS1 control performance.
"""

__version__ = "0.1.0"
