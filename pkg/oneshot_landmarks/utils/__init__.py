"""
Utility function modules.
"""
