"""Cuboid assemblies for indoor scene layouts."""
