"""
Package initialization file for flow module
"""
