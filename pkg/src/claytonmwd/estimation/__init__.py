"""Point and interval estimators for the seven model parameters."""
