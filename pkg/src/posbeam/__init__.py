"""posbeam: urban IIoT positioning-aided mmWave beam management simulator.

Phase 1 tracks a moving device with an EKF fusing DoA (and optionally ToA)
measurements from the two closest line-of-sight TRPs; phase 2 replays the
trajectory at TTI granularity and compares beam-selection strategies
(periodic sweep baseline, position-aided, reference, genie) in terms of
SNR and Shannon rate.
"""

__version__ = "0.1.0"
