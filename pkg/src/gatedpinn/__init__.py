"""Physics-informed neural networks (dense and gated mixture-of-experts) for
the 2D quantum harmonic oscillator."""

__version__ = "0.1.0"
