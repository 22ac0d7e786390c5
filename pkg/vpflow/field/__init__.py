"""
Package initialization file for field module
"""
from vpflow.phase_state.grid import GridField, GridSpec

__all__ = ['GridField', 'GridSpec']
