"""
Package initialization file for phase_state module
"""
