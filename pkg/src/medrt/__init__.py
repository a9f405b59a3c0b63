"""medrt: real-time medical image inference stack."""

__version__ = "0.1.0"
