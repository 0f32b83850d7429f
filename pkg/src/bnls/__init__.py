"""Radial ground states and Nehari critical points for biharmonic NLS equations."""
