"""Quantum-secure transport channels around a small federated learning loop.

Subsystems: ``qsim`` (statevector substrate), ``qkd`` (BB84 sessions),
``symcrypto`` (pads, AEAD envelopes, packing, key derivation), ``pqc``
(KEM/signature providers and benchmarks), ``tpchannel`` (teleportation
transfer), ``vqc``/``datasets`` (the classifier and its data),
``fedcore`` (round orchestration), and the ``qshield`` CLI.
"""
__version__ = "0.1.0"
