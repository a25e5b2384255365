"""
Configuration package for the quadtree ladder toolkit
"""
