"""
Utility functions and shared components for basket-ssd
"""
