"""Plaintext genotype data: encoding, CSV ingestion and synthetic cohorts.

Each SNP cell is an ordered nucleotide pair mapped to a code in 1..16 by
lexicographic rank (AA=1, AC=2, ..., TT=16).  The phenotype is carried as
one extra column whose values are 1 (Positive) and 2 (Negative), so a
record with ``n_snps`` genotypes spans ``n_snps + 1`` tree levels.
"""

import csv
import io
from dataclasses import dataclass
from importlib import resources
from itertools import product

import numpy as np

from .errors import (
    InvalidLength,
    InvalidNucleotide,
    InvalidPhenotype,
    MalformedRow,
    OutOfRange,
)

NUCLEOTIDES = "ACGT"
GENOTYPES = tuple(a + b for a, b in product(NUCLEOTIDES, repeat=2))
_CODE_OF = {pair: i + 1 for i, pair in enumerate(GENOTYPES)}

POSITIVE = 1
NEGATIVE = 2
PHENOTYPES = {"Positive": POSITIVE, "Negative": NEGATIVE}
_PHENOTYPE_NAME = {v: k for k, v in PHENOTYPES.items()}


def encode_genotype(pair):
    if len(pair) != 2:
        raise InvalidLength(f"genotype must be 2 characters, got {pair!r}")
    code = _CODE_OF.get(pair)
    if code is None:
        raise InvalidNucleotide(f"genotype {pair!r} has a character outside ACGT")
    return code


def decode_genotype(code):
    if not 1 <= code <= 16:
        raise OutOfRange(f"genotype code {code} not in 1..16")
    return GENOTYPES[code - 1]


def encode_phenotype(name):
    try:
        return PHENOTYPES[name]
    except KeyError:
        raise InvalidPhenotype(f"phenotype must be Positive or Negative, got {name!r}") from None


def decode_phenotype(code):
    try:
        return _PHENOTYPE_NAME[code]
    except KeyError:
        raise OutOfRange(f"phenotype code {code} not in {{1, 2}}") from None


@dataclass(frozen=True)
class Record:
    genotypes: tuple
    phenotype: int

    @property
    def values(self):
        """Genotype codes followed by the phenotype code, one per tree level."""
        return self.genotypes + (self.phenotype,)


@dataclass(frozen=True)
class Dataset:
    n_snps: int
    records: tuple = ()

    def __post_init__(self):
        if self.n_snps < 1:
            raise ValueError("n_snps must be at least 1")
        object.__setattr__(self, "records", tuple(self.records))
        for i, rec in enumerate(self.records):
            if len(rec.genotypes) != self.n_snps:
                raise MalformedRow(
                    f"record {i + 1} has {len(rec.genotypes)} genotypes, expected {self.n_snps}"
                )

    def __len__(self):
        return len(self.records)

    @property
    def n_records(self):
        return len(self.records)

    @property
    def phenotype_sid(self):
        return self.n_snps + 1

    def matrix(self):
        """Records as an ``(n_records, n_snps + 1)`` uint8 array of codes."""
        if not self.records:
            return np.zeros((0, self.n_snps + 1), dtype=np.uint8)
        return np.array([r.values for r in self.records], dtype=np.uint8)

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix)
        rows = matrix.tolist()
        return cls(
            n_snps=matrix.shape[1] - 1,
            records=tuple(Record(tuple(row[:-1]), row[-1]) for row in rows),
        )


def parse_dataset(source):
    """Read the ``case,SNP_1,...,SNP_n,phenotype`` CSV format.

    ``source`` is a string or a text stream.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedRow("missing header row") from None
    n_snps = len(header) - 2
    if n_snps < 1 or header[0].lower() != "case" or header[-1].lower() != "phenotype":
        raise MalformedRow(f"bad header {header!r}")

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != n_snps + 2:
            raise MalformedRow(f"line {lineno}: {len(row)} cells, expected {n_snps + 2}")
        genotypes = tuple(encode_genotype(cell.strip()) for cell in row[1:-1])
        records.append(Record(genotypes, encode_phenotype(row[-1].strip())))
    return Dataset(n_snps, tuple(records))


def serialize_dataset(dataset):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["case", *(f"SNP_{j}" for j in range(1, dataset.n_snps + 1)), "phenotype"])
    for i, rec in enumerate(dataset.records, start=1):
        writer.writerow(
            [i, *(GENOTYPES[c - 1] for c in rec.genotypes), _PHENOTYPE_NAME[rec.phenotype]]
        )
    return out.getvalue()


def load_dataset(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_dataset(fh)


def example_dataset():
    """The ten-patient, five-SNP cohort used throughout the docs and tests."""
    text = resources.files("snpvault").joinpath("data/cohort10.csv").read_text("utf-8")
    return parse_dataset(text)


def _column_distributions(rng, n_snps):
    # Biallelic SNPs under Hardy-Weinberg: genotypes XX, XY, YY with
    # frequencies (1-f)^2, 2f(1-f), f^2 for a minor allele frequency f.
    codes = np.empty((n_snps, 3), dtype=np.uint8)
    probs = np.empty((n_snps, 3))
    for j in range(n_snps):
        x, y = sorted(rng.choice(4, size=2, replace=False))
        codes[j] = (4 * x + x + 1, 4 * x + y + 1, 4 * y + y + 1)
        f = rng.uniform(0.05, 0.5)
        probs[j] = ((1 - f) ** 2, 2 * f * (1 - f), f * f)
    return codes, probs


def generate_synthetic(n_records, n_snps, seed, base=None, perturb_rate=0.002):
    """Deterministic synthetic cohort.

    Without ``base`` every SNP column is an independent biallelic locus with
    three observed genotypes.  With ``base`` the rows are resampled from the
    base cohort and each cell is replaced, with probability
    ``perturb_rate``, by a value drawn from that column's empirical marginal.
    """
    if n_records < 1 or n_snps < 1:
        raise ValueError("n_records and n_snps must both be at least 1")
    rng = np.random.default_rng(seed)

    if base is None:
        codes, probs = _column_distributions(rng, n_snps)
        cum = probs.cumsum(axis=1)
        u = rng.random((n_records, n_snps))
        idx = (u[:, :, None] > cum[None, :, :2]).sum(axis=2)
        genos = codes[np.arange(n_snps)[None, :], idx]
        pheno = np.where(rng.random(n_records) < 0.5, POSITIVE, NEGATIVE).astype(np.uint8)
        return Dataset.from_matrix(np.column_stack([genos, pheno]))

    if base.n_snps != n_snps:
        raise ValueError(f"base has {base.n_snps} SNPs, asked for {n_snps}")
    if not base.records:
        raise ValueError("base dataset is empty")
    base_m = base.matrix()
    rows = base_m[rng.integers(len(base_m), size=n_records)]
    mask = rng.random((n_records, n_snps)) < perturb_rate
    ri, cj = np.nonzero(mask)
    rows[ri, cj] = base_m[rng.integers(len(base_m), size=len(ri)), cj]
    return Dataset.from_matrix(rows)
