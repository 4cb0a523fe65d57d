"""Plugin-based gRPC control daemon for register-level device access."""

__version__ = "0.1.0"
