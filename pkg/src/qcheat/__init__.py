"""Heat-kernel invariants of the intrinsic sublaplacian on quaternionic contact manifolds."""

__version__ = "0.1.0"
