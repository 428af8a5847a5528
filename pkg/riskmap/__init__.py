"""
riskmap - survival and level-crossing probabilities for Markov-modulated
risk processes whose ruin is only detected at Poisson observation epochs.
"""

__version__ = "1.0.0"
