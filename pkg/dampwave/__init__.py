"""dampwave, simulator and property checks for the strongly damped p-Laplacian wave equation."""

__version__ = "1.0.0"
