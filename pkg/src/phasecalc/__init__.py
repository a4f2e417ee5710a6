"""phasecalc: weighted phase-space pseudodifferential calculus at desk scale.

Numerical machinery for 1-D strictly hyperbolic Cauchy problems whose
coefficients blow up like t^-q at the initial time: weight functions and
their lattice, phase-space metrics with zone decompositions, Gevrey symbol
classes on grids, discrete Kohn-Nirenberg quantization with a composition /
transpose / parametrix calculus, infinite-order exponential conjugation,
root mollification and first-order reduction, energy estimates, and the
anisotropic cone of dependence.
"""

__version__ = "0.1.0"
