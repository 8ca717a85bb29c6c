"""Test package for spectral-vote."""
