"""Adaptive Type I / EType II CSI codebook selection with federated echo state networks."""
from . import adaptation, channel, codebook, features, fed, link, rc
from .errors import NrCbaError

__version__ = "0.1.0"

__all__ = ["adaptation", "channel", "codebook", "features", "fed", "link", "rc", "NrCbaError", "__version__"]
