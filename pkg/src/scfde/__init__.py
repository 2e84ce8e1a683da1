"""Single-carrier FDE link simulator with symbol-rate nonlinear post-distortion."""

__version__ = "0.1.0"
