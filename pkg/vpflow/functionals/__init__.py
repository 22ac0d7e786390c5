"""
Package initialization file for functionals module
"""
