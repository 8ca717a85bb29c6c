"""Pseudo-masks for salient object detection from spectral clustering and voting."""
