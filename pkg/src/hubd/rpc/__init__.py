"""gRPC wire schema and service plumbing."""
