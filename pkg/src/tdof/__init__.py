"""Data-augmentation MCMC for the Student-t degrees-of-freedom parameter.

Three update schemes for the degrees-of-freedom parameter of a Student-t
model -- a sufficiency-parameterized Gibbs step with exact rejection
sampling, an ancillarity-parameterized step driven by adaptive Metropolis,
and their interweaving -- together with efficiency diagnostics, augmented
Fisher-information analysis, a simulation-study driver, and an
autoregressive trend-cycle application.
"""

__version__ = "0.1.0"

FORMAT_VERSION = 1
