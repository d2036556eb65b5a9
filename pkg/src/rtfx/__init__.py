"""Delay-based real-time audio effects.

Submodules:

- ``dsp``        delay lines, sparse transfer functions, block filtering, stability
- ``effects``    echo/comb/allpass/stress/chorus constructors and effect graphs
- ``stressmath`` numeric checks of the stress-generator partial fractions
- ``scheduler``  idle-task vs critical-task streaming with deadline metrics
- ``audio_io``   WAV files and test signals
- ``chain``      effect-chain config files
- ``cocomo``     basic COCOMO estimates
"""

from .dsp import (
    AudioBlock,
    DelayLine,
    FilterState,
    SparseRationalTF,
    StabilityReport,
    analyze_stability,
    impulse_response,
    tf_process_block,
)

__version__ = "0.1.0"

__all__ = [
    "AudioBlock",
    "DelayLine",
    "FilterState",
    "SparseRationalTF",
    "StabilityReport",
    "analyze_stability",
    "impulse_response",
    "tf_process_block",
]
