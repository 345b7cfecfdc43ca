"""Hypothesis strategies for small datasets and predicates."""

from hypothesis import strategies as st

from snpvault.genomics import Dataset, Record
from snpvault.index_tree import QueryPredicate


@st.composite
def datasets(draw, min_records=0, max_records=60, max_snps=8, alphabet=4):
    """Small datasets; a narrow per-column alphabet keeps branches shared."""
    n_snps = draw(st.integers(1, max_snps))
    codes = [draw(st.lists(st.integers(1, 16), min_size=1, max_size=alphabet, unique=True))
             for _ in range(n_snps)]
    n = draw(st.integers(min_records, max_records))
    records = []
    for _ in range(n):
        genos = tuple(draw(st.sampled_from(c)) for c in codes)
        records.append(Record(genos, draw(st.sampled_from((1, 2)))))
    return Dataset(n_snps, tuple(records))


@st.composite
def predicates(draw, dataset, max_terms=5):
    columns = dataset.n_snps + 1
    sids = draw(st.lists(st.integers(1, columns), max_size=min(max_terms, columns), unique=True))
    terms = {}
    for sid in sids:
        top = 2 if sid == columns else 16
        if dataset.records and draw(st.booleans()):
            rec = draw(st.sampled_from(dataset.records))
            terms[sid] = rec.values[sid - 1]
        else:
            terms[sid] = draw(st.integers(1, top))
    return QueryPredicate.of(terms)
