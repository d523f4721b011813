"""Exact finite-sample variance accounting for subsampled ensembles.

The package is organised around one identity: the variance of an ensemble
built by averaging a symmetric base procedure over all (or many) size-k
subsamples of an n-point dataset equals a weighted sum of interaction
variances, with weights that depend only on (n, k) and the interaction
order.  Everything else here either extracts those interaction variances
(`anova`), checks the identity against brute force (`subag`), turns it
into a bias/variance envelope with a subsampling-ratio optimizer
(`envelope`), selects the ratio adaptively from data (`cgas`), or runs
the comparison harness (`bench`).
"""

__version__ = "0.1.0"
