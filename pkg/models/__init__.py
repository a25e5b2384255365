"""
Block structure models for the quadtree ladder toolkit
"""
