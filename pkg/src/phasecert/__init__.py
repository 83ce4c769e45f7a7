"""phasecert: grid certification of collar phases, symplectic maps, and
operator-valued symbol estimates."""

__version__ = "0.1.0"
