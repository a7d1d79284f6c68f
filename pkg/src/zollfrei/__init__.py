"""Closed lightlike geodesics on Lorentzian Berger spheres and magnetic flows on surfaces."""
__version__ = "0.1.0"
