"""Mutation testing of quantum programs under simulated noise.

Modules:
    circuit: OpenQASM 2.0 subset parser, emitter and circuit IR.
    sim: density-matrix simulator with Kraus noise and seeded shot sampling.
    metrics: trace distance, fidelity, Hellinger, Jensen-Shannon, expectation difference.
    mutate: mutant generation, equivalence oracle and balanced sampling.
    inputs: classical and quantum test-suite construction.
    thresholds: threshold calibration and the four detection strategies.
    analysis: confusion scores and non-parametric statistics.
    pipeline: the end-to-end experiment workflow and its file formats.
"""

__version__ = "0.1.0"
