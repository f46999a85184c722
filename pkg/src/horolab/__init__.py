"""horolab: numerical experiments on horospherical equidistribution for Schottky quotients of real hyperbolic space."""

from horolab.errors import HorolabError

__version__ = "0.1.0"

__all__ = ["HorolabError", "__version__"]
