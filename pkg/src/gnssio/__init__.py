"""gnssio: indoor/outdoor environment classification from GNSS observations."""

__version__ = "0.1.0"
