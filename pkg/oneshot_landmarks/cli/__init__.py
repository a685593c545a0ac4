"""
CLI module for Oneshot Landmarks.
"""
