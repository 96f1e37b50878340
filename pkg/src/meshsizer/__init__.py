"""Near-optimal spacing fields for viscous-flow meshes."""

__version__ = "0.1.0"
