"""Off-grid station weather forecasting from station history and gridded fields."""

__version__ = "0.1.0"

VARIABLES = ("u", "v", "temperature", "dewpoint")
