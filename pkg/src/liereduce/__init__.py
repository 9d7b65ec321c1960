"""Verification and construction of (orbitally) reducible ODEs over an exact function field."""
