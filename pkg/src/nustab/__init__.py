"""Stabilizing state feedback for nonuniformly sampled LTI plants via
singular value assignment."""

__version__ = "0.1.0"
