"""
Package initialization file for utils module
"""
