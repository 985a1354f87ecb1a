"""forest-link: forest radio channel toolkit.

Large-scale path-loss models for ground and air-to-ground forest links,
a least-squares fitting engine with shadow-fading statistics, stochastic
multipath synthesis, an OFDM channel-sounding simulator and delay/angle
parameter extraction.
"""

__version__ = "0.1.0"

from . import angular, config, fitting, ioformats, mpc, ofdm, pathloss, pipeline, synth

__all__ = ["angular", "config", "fitting", "ioformats", "mpc", "ofdm",
           "pathloss", "pipeline", "synth", "__version__"]
