"""
Simulation and verification lab for the stochastic dyadic model of ideal MHD.
"""

__version__ = "0.1.0"
