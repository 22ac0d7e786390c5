"""
Package initialization file for experiments module
"""
