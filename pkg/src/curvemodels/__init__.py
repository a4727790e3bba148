"""Exact computation of cusp form bases fixed by congruence group data and
canonical models over Q for the associated quotient curves."""

__version__ = "0.1.0"
