"""
Controllers package: solvers, moment-system construction, profiling and inference.
"""
