"""Surrogate modeling toolkit for pin-fin cold plate conjugate heat transfer."""
