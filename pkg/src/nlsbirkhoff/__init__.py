"""Birkhoff coordinates for the Galerkin-truncated cubic NLS.

Modules
-------
seqspace     weighted sequence spaces and truncated states
weightcert   arithmetic kernels and certification of the weight condition
polymap      sparse polynomial maps, composition, inversion, flows, averaging
zsspectral   Zakharov-Shabat spectra, Riesz projectors, gap coordinates
psitaylor    Taylor kernels of the Birkhoff map by contour and by extraction
kpnormalize  normalization to a symplectic map with the same actions
dynamics     truncated NLS integration and conservation diagnostics
acceptance   the acceptance suite
cli          command line driver
"""

__version__ = "0.1.0"

from ._accel import USE_NUMBA, backend_name  # noqa: E402

__all__ = ["__version__", "USE_NUMBA", "backend_name"]
