"""Ten patients, five SNPs: the whole pipeline on one small cohort."""

from snpvault.genomics import decode_genotype, encode_genotype, encode_phenotype, example_dataset
from snpvault.index_tree import QueryPredicate, build_tree, dump_tree, naive_count, trace_query
from snpvault.protocol import ProtocolConfig, run_protocol
from snpvault.transport import MessageType

print("== 1. the cohort ==")
data = example_dataset()
for i, rec in enumerate(data.records, 1):
    print(f"   {i:2d}", " ".join(decode_genotype(v) for v in rec.genotypes),
          "Positive" if rec.phenotype == 1 else "Negative")

print("== 2. the index tree ==")
tree = build_tree(data)
print(dump_tree(tree), end="")
print("   nodes:", len(tree))

print("== 3. a count query in the clear ==")
query = QueryPredicate.parse("SNP2=CC,SNP3=TT,SNP5=CC,PHENO=Positive", data.n_snps)
print("   terms:", query.terms)
print("   scan:", naive_count(data, query), " tree:", trace_query(tree, query).count)

print("== 4. the same query, encrypted ==")
res = run_protocol(data, query, ProtocolConfig(seed=1))
print("   count:", res.count)
print("   CS compared", len(res.trace.compared), "nodes and summed", len(res.trace.accumulated))
for mtype in MessageType:
    frames = res.transcript.of_type(mtype)
    if frames:
        print(f"   {mtype.name:16s} x{len(frames):<3d} {sum(e.nbytes for e in frames):7d} bytes")

print("== 5. a second query ==")
q2 = QueryPredicate.of({1: encode_genotype("GG"), 3: encode_genotype("TT"),
                        5: encode_genotype("CC"), 6: encode_phenotype("Positive")})
print("   count:", run_protocol(data, q2, ProtocolConfig(seed=2)).count)

print("== 6. nothing matches ==")
q3 = QueryPredicate.of({1: encode_genotype("TT")})
r3 = run_protocol(data, q3, ProtocolConfig(seed=3))
print("   count:", r3.count, " comparisons:", len(r3.trace.compared))
