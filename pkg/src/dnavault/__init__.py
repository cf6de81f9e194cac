"""DNA-sequence image encryption with block scrambling and multi-cloud replicas."""

from .cipher import (
    CipherContainer,
    EncryptOptions,
    decrypt,
    deserialize,
    encrypt,
    extract_corner_metadata,
    render_cipher_image,
    serialize,
)
from .codec import DnaImage, rev_synthesize, synthesize, translate
from .keystore import KeyIndex, KeyRegistry, KeySequence, build_index, ingest_fasta
from .scramble import descramble_cells, pattern_permutation, scramble_cells

__version__ = "0.1.0"
