"""
Package initialization file for config module
"""
