"""Single-cell LTE uplink simulator for D2D offloading of poor-channel users."""

__version__ = "0.1.0"
