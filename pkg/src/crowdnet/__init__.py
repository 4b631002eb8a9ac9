"""Crowding signals from fund-holdings networks and the long/short hedge built on them."""

__version__ = "0.1.0"
