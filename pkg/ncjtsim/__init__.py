"""
ncjtsim

System-level simulator for downlink multi-TRP coordination: dynamic point
selection and fully or non-fully overlapped non-coherent joint transmission
under centralized and distributed schedulers.
"""

__version__ = "1.0.0"
