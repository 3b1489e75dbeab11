"""qepol: simulation and analysis of polarization dynamics of solid-state
single-photon emitters.

Simulator (simulate) and analysis chain (analysis, fitting) share the data
products defined alongside them; geometry and photophysics hold the
underlying models, tdm/wfgrid the electronic-structure side, and
formats/config/reports the on-disk interfaces.
"""

__version__ = "0.1.0"
