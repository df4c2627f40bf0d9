"""Landau-Zener dynamics of driven Rydberg atoms.

Exact Schroedinger propagation and an independent impulse (sudden-jump)
treatment for two systems: a single two-level atom under a periodically
swept detuning, and a pair of interacting three-level atoms (gg / s / rr)
swept linearly or periodically through their three avoided crossings.
The two engines are built to be cross-checked against each other.

Layout:

- hamiltonian: system/drive specs, instantaneous spectra, crossings
- propagator:  adaptive Runge-Kutta integration of the exact dynamics
- aia:         impulse matrices, cycle products, closed forms, validity
- analysis:    sweeps, resonance catalogs, beat/chirp extraction
- special:     parabolic cylinder phases entering the jump matrices
- cli:         `lzsim` command-line front end
"""

from .errors import (CrossingInsideSegment, InsufficientResolution,
                     LZSimError, NoBeat, NoCrossing, ParseError,
                     ValidationError)
from .hamiltonian import (LINEAR, PERIODIC, THREE_LEVEL, TWO_LEVEL,
                          CrossingEvent, DriveProtocol, EigenFrame,
                          GapReport, SystemSpec, crossing_targets,
                          crossing_times, detuning, detuning_rate,
                          diabatic_character, eigenbasis, eigensystem,
                          gap_report, hamiltonian_matrix, level_energies)
from .propagator import (StateVector, SweepWindow, TrajectoryRecord,
                         channel_names, default_window, initial_state,
                         integrate, integrate_reference, project_adiabatic,
                         time_average)
from .aia import (CycleDecomposition, LZParams, TransferMatrix,
                  ValidityCriterion, ValidityReport, adiabatic_matrix,
                  closed_form_two_level, compose_linear, compose_periodic,
                  impulse_matrix, lz_probability, periodic_time_average,
                  stokes_phase, validity_report)
from .analysis import (BeatReport, ResonanceCatalog, ResonanceLine,
                       SpectralFeature, SweepAxis, SweepGrid, beat_analysis,
                       detect_resonances, interacting_correction_final,
                       multislit_reference, noninteracting_final,
                       pair_jump_probabilities, resonance_catalog,
                       run_sweep, symmetric_window)

__version__ = "0.1.0"

__all__ = [
    "LZSimError", "ParseError", "ValidationError", "NoCrossing", "NoBeat",
    "CrossingInsideSegment", "InsufficientResolution",
    "LINEAR", "PERIODIC", "TWO_LEVEL", "THREE_LEVEL",
    "SystemSpec", "DriveProtocol", "EigenFrame", "GapReport",
    "CrossingEvent", "detuning", "detuning_rate", "hamiltonian_matrix",
    "level_energies", "eigenbasis", "eigensystem", "diabatic_character",
    "gap_report", "crossing_targets", "crossing_times",
    "StateVector", "SweepWindow", "TrajectoryRecord", "channel_names",
    "initial_state", "default_window", "integrate", "integrate_reference",
    "project_adiabatic", "time_average",
    "LZParams", "TransferMatrix", "CycleDecomposition",
    "ValidityCriterion", "ValidityReport", "lz_probability", "stokes_phase",
    "impulse_matrix", "adiabatic_matrix", "compose_linear",
    "compose_periodic", "periodic_time_average", "closed_form_two_level",
    "validity_report",
    "SweepAxis", "SweepGrid", "run_sweep", "symmetric_window",
    "ResonanceLine", "ResonanceCatalog", "resonance_catalog",
    "SpectralFeature", "detect_resonances", "BeatReport", "beat_analysis",
    "multislit_reference", "noninteracting_final",
    "pair_jump_probabilities", "interacting_correction_final",
    "__version__",
]
