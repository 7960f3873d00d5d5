"""Point-scattering-center toolkit: forward models, unrolled half-quadratic
splitting estimation, physics-guided losses, a scene simulator, and image
quality metrics for SAR-like magnitude imagery."""

__version__ = "0.1.0"
