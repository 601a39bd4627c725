"""Chamber counting and interior-point sampling for arrangements.

Core pieces: exact arrangement combinatorics (`arrangement`), generating
function and CSM-class calculus (`eulercalc`), exact sparse polynomials and
log-likelihood critical systems (`polysys`), a numerical continuation engine
(`tracker`), Milnor numbers of projective divisors (`milnor`), and the
region sampler with its LP baseline (`sampler`).  The FastAPI surface lives
in `service`, the CLI in `cli`.
"""

__version__ = "0.1.0"
