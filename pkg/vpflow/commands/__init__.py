"""
Package initialization file for commands module
"""
