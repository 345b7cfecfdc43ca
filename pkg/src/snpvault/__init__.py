"""Secure count queries over an encrypted SNP index tree.

A trusted institution encrypts a prefix tree of genotype records under
Paillier; a cloud server answers conjunctive count queries by walking the
tree and testing each queried node with a masked garbled-circuit equality
check, so neither genotypes nor counts are revealed to it.
"""

from .errors import SnpVaultError
from .genomics import (
    Dataset,
    Record,
    decode_genotype,
    encode_genotype,
    encode_phenotype,
    example_dataset,
    generate_synthetic,
    load_dataset,
    parse_dataset,
)
from .index_tree import IndexTree, QueryPredicate, build_tree, naive_count, trace_query
from .paillier import PaillierCiphertext, PublicKey, SecretKey, decrypt, encrypt, keygen
from .protocol import (
    CloudServer,
    EncryptedQuery,
    EncryptedTree,
    ProtocolConfig,
    Researcher,
    ci_encrypt_tree,
    cs_execute_query,
    researcher_decrypt_result,
    researcher_encrypt_query,
    run_count_query,
    run_protocol,
)
from .transport import MessageType, Transcript

__version__ = "0.1.0"

__all__ = [
    "SnpVaultError",
    "Dataset",
    "Record",
    "decode_genotype",
    "encode_genotype",
    "encode_phenotype",
    "example_dataset",
    "generate_synthetic",
    "load_dataset",
    "parse_dataset",
    "IndexTree",
    "QueryPredicate",
    "build_tree",
    "naive_count",
    "trace_query",
    "PaillierCiphertext",
    "PublicKey",
    "SecretKey",
    "decrypt",
    "encrypt",
    "keygen",
    "CloudServer",
    "EncryptedQuery",
    "EncryptedTree",
    "ProtocolConfig",
    "Researcher",
    "ci_encrypt_tree",
    "cs_execute_query",
    "researcher_decrypt_result",
    "researcher_encrypt_query",
    "run_count_query",
    "run_protocol",
    "MessageType",
    "Transcript",
]
