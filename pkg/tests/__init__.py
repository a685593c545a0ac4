"""
Test package.
""" 