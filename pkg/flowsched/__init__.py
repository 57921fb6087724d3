"""
flowsched – approximation pipelines for delay-cost scheduling.
"""
__version__ = "1.0.0"
