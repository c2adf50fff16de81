"""Special functions, random streams, root finding, and differentiation."""

from tdof.numerics.richardson import second_derivative
from tdof.numerics.rng import RandomStream
from tdof.numerics.rootfind import Bracket, find_root
from tdof.numerics.sampling import sample_gamma
from tdof.numerics.special import (
    digamma,
    log_gamma,
    norm_cdf,
    norm_quantile,
    reg_gamma_quantile,
    reg_lower_gamma,
    reg_upper_gamma,
    trigamma,
)

__all__ = [
    "Bracket",
    "RandomStream",
    "digamma",
    "find_root",
    "log_gamma",
    "norm_cdf",
    "norm_quantile",
    "reg_gamma_quantile",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "sample_gamma",
    "second_derivative",
    "trigamma",
]
