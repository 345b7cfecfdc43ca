"""Benchmark harness: per-phase wall time, bytes and oracle checks as CSV.

Scenarios are the cross product of record counts, SNP counts and query
sizes.  Synthetic cohorts are rows resampled from a small base cohort
(``base_records`` rows), optionally perturbed cell by cell.  Every query
result is checked against a plaintext scan and any divergence aborts the
run.
"""

import csv
import json
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field, fields

from .errors import SnpVaultError
from .genomics import (
    GENOTYPES,
    PHENOTYPES,
    generate_synthetic,
    load_dataset,
    serialize_dataset,
)
from .index_tree import QueryPredicate, build_tree, naive_count
from .paillier import keygen
from .protocol import CloudServer, Researcher, ci_encrypt_tree
from .rand import child_rng, seeded_rng
from .secure_compare.masked import DEFAULT_MASK_BITS
from .transport import LoopbackChannel, Transcript

CSV_FIELDS = ("n_records", "n_snps", "query_size", "phase", "seconds", "bytes", "count", "oracle_count")
PHASES = ("read", "build", "encrypt", "query")


class BenchMismatch(SnpVaultError):
    """A protocol result disagreed with the plaintext oracle."""


@dataclass
class BenchConfig:
    records: list = field(default_factory=lambda: [5000])
    snps: list = field(default_factory=lambda: [60])
    query_sizes: list = field(default_factory=lambda: [10, 20, 30, 40])
    reps: int = 10
    seed: int = 0
    key_bits: int = 256
    mask_bits: int = DEFAULT_MASK_BITS
    out: str = None
    phases: list = field(default_factory=lambda: list(PHASES))
    base_records: int = 400
    perturb_rate: float = 0.0

    def __post_init__(self):
        for name in ("records", "snps", "query_sizes", "phases"):
            value = getattr(self, name)
            if isinstance(value, (int, str)):
                value = [value]
            if not value:
                raise ValueError(f"{name} grid must not be empty")
            setattr(self, name, list(value))
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        unknown = set(self.phases) - set(PHASES)
        if unknown:
            raise ValueError(f"unknown phases {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)


@dataclass
class BenchRow:
    """One averaged measurement.

    ``seconds`` and ``bytes`` are means over the repetitions.  For query
    rows ``count`` and ``oracle_count`` are sums over the repetitions (each
    repetition is also checked individually); other phases report the
    records or nodes they processed against the expected number.
    """

    n_records: int
    n_snps: int
    query_size: int
    phase: str
    seconds: float
    bytes: int
    count: int
    oracle_count: int

    def as_csv(self):
        return {
            "n_records": self.n_records,
            "n_snps": self.n_snps,
            "query_size": self.query_size,
            "phase": self.phase,
            "seconds": f"{self.seconds:.6f}",
            "bytes": self.bytes,
            "count": self.count,
            "oracle_count": self.oracle_count,
        }


def random_predicate(dataset, size, rng, include_phenotype=False, miss_rate=0.0):
    """Query over ``size`` distinct columns, values taken from a random record.

    With ``miss_rate`` > 0 each value is independently replaced by a random
    code, so some queries match nothing.
    """
    columns = dataset.n_snps + (1 if include_phenotype else 0)
    if not 0 <= size <= columns:
        raise ValueError(f"query size {size} outside 0..{columns}")
    sids = rng.sample(range(1, columns + 1), size)
    record = dataset.records[rng.randrange(dataset.n_records)].values
    terms = {}
    for sid in sids:
        val = record[sid - 1]
        if miss_rate and rng.random() < miss_rate:
            top = len(PHENOTYPES) if sid == dataset.phenotype_sid else len(GENOTYPES)
            val = rng.randint(1, top)
        terms[sid] = val
    return QueryPredicate.of(terms)


def synthetic_cohort(n_records, n_snps, seed, base_records=400, perturb_rate=0.0):
    base = generate_synthetic(base_records, n_snps, seed=seed)
    return generate_synthetic(n_records, n_snps, seed=seed + 1, base=base, perturb_rate=perturb_rate)


class _QuerySession:
    """A CS thread and a researcher bound by a loopback pair."""

    def __init__(self, enc_tree, pk, sk, mask_bits, rng):
        self.transcript = Transcript()
        self.server = CloudServer(enc_tree, rng=child_rng(rng, "cs"))
        self.researcher = Researcher(pk, sk, mask_bits, child_rng(rng, "researcher"))
        self.r_end, cs_end = LoopbackChannel.pair("R", "CS", self.transcript)
        self.thread = threading.Thread(target=self.server.handle, args=(cs_end,), daemon=True)
        self.thread.start()
        self.session = 0

    def query(self, predicate):
        before = self.transcript.bytes_between("CS", "R")
        start = time.perf_counter()
        count = self.researcher.query(self.r_end, predicate, self.session)
        elapsed = time.perf_counter() - start
        self.session += 1
        return count, elapsed, self.transcript.bytes_between("CS", "R") - before

    def close(self):
        self.r_end.close()
        self.thread.join()


def _mean(xs):
    return sum(xs) / len(xs)


def run_bench(config, progress=None):
    """Run every scenario sequentially; returns the list of ``BenchRow``."""
    rows = []
    say = progress or (lambda msg: None)
    for n_records in config.records:
        for n_snps in config.snps:
            rows.extend(_run_scenario(config, n_records, n_snps, say))
    return rows


def _run_scenario(config, n_records, n_snps, say):
    rows = []
    seed = config.seed
    rng = seeded_rng(seed, f"bench/{n_records}/{n_snps}")
    dataset = synthetic_cohort(n_records, n_snps, seed, config.base_records, config.perturb_rate)
    say(f"scenario {n_records} records x {n_snps} SNPs")

    if "read" in config.phases:
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "cohort.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(serialize_dataset(dataset))
            times = []
            for _ in range(config.reps):
                start = time.perf_counter()
                loaded = load_dataset(path)
                times.append(time.perf_counter() - start)
        rows.append(BenchRow(n_records, n_snps, 0, "read", _mean(times), 0, loaded.n_records, n_records))

    times = []
    for _ in range(config.reps if "build" in config.phases else 1):
        start = time.perf_counter()
        tree = build_tree(dataset)
        times.append(time.perf_counter() - start)
    if "build" in config.phases:
        rows.append(BenchRow(n_records, n_snps, 0, "build", _mean(times), 0, tree.n_records, n_records))
        say(f"  build {rows[-1].seconds:.3f}s, {len(tree)} nodes")

    if not {"encrypt", "query"} & set(config.phases):
        return rows

    pk, sk = keygen(config.key_bits, rng)
    times = []
    for _ in range(config.reps if "encrypt" in config.phases else 1):
        start = time.perf_counter()
        enc_tree = ci_encrypt_tree(tree, pk, rng, secret_key=sk)
        times.append(time.perf_counter() - start)
    if "encrypt" in config.phases:
        n_nodes = len(tree)
        rows.append(BenchRow(n_records, n_snps, 0, "encrypt", _mean(times), 0, len(enc_tree), n_nodes))
        say(f"  encrypt {rows[-1].seconds:.3f}s")

    if "query" not in config.phases:
        return rows
    session = _QuerySession(enc_tree, pk, sk, config.mask_bits, rng)
    try:
        for size in config.query_sizes:
            times, sizes, got, want = [], [], 0, 0
            for rep in range(config.reps):
                predicate = random_predicate(dataset, size, rng)
                count, elapsed, nbytes = session.query(predicate)
                oracle = naive_count(dataset, predicate)
                if count != oracle:
                    raise BenchMismatch(
                        f"{n_records}x{n_snps} query size {size} rep {rep}: "
                        f"protocol returned {count}, oracle {oracle}"
                    )
                times.append(elapsed)
                sizes.append(nbytes)
                got += count
                want += oracle
            rows.append(
                BenchRow(n_records, n_snps, size, "query", _mean(times), round(_mean(sizes)), got, want)
            )
            say(f"  query size {size}: {rows[-1].seconds:.3f}s, {rows[-1].bytes} bytes")
    finally:
        session.close()
    return rows


def write_csv(rows, path_or_stream):
    def dump(fh):
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.as_csv())

    if hasattr(path_or_stream, "write"):
        dump(path_or_stream)
    else:
        with open(path_or_stream, "w", newline="", encoding="utf-8") as fh:
            dump(fh)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            BenchRow(
                int(r["n_records"]), int(r["n_snps"]), int(r["query_size"]), r["phase"],
                float(r["seconds"]), int(r["bytes"]), int(r["count"]), int(r["oracle_count"]),
            )
            for r in csv.DictReader(fh)
        ]
