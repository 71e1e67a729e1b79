"""Recommender-system completion of rating databases of quantum evolutions."""
__version__ = "0.1.0"
