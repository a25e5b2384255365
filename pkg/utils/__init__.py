"""
Utilities package for the quadtree ladder toolkit
"""
