"""Relaxometry of rotational Brownian motion: forward models, measurement
simulation, curve fitting, and sensitivity analysis for a spin sensor in a
nanoparticle surrounded by fluctuating magnetic baths."""

__version__ = "0.1.0"
