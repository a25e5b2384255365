"""
UI pages package for the quadtree ladder dashboard
"""
