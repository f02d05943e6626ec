"""SIR meta distributions of joint communication and sensing cellular networks."""

__version__ = "0.1.0"
