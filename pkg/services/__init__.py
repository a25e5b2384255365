"""
Services package for the quadtree ladder toolkit
"""
