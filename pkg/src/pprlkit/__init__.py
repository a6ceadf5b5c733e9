"""Privacy-preserving record linkage toolkit.

Implements and evaluates the main name-protection options for record
linkage within one organisation: HMAC linkage identifiers over attribute
subsets with deterministic indexed linking, Bloom-filter bi-gram
similarity (and its failure modes), lossy name bucketing, and public-key
envelope encryption with threshold key sharing, together with the
dictionary and frequency attacks that break the naive schemes and a
synthetic-population benchmark harness.
"""

__version__ = "0.1.0"
