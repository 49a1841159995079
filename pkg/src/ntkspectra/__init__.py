"""Neural tangent kernel spectra for data of non-uniform density.

Modules
-------
geometry   points, densities, samplers and targets
kernels    closed-form two-layer and deep ReLU kernels
spectral   Gram matrices, eigen-systems and eigenvector analysis
analytic   closed-form eigenfunctions for piecewise-constant densities
nets       finite-width networks and gradient-descent training
predictor  spectral convergence law and comparison with training
expcli     experiment configurations, figure runners and the CLI
"""

__version__ = "0.1.0"
