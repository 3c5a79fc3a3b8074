"""aniso - anisotropic proximal mappings, envelopes and splitting-based training."""

__version__ = "0.3.0"
__description__ = "phi-proximal mappings, Moreau-type envelopes and elastic distributed training"
