import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audit import audit
from snpvault.errors import (
    CiphertextOutOfRange,
    DecodeFailure,
    InvalidPredicate,
    ProtocolError,
    SidBeyondDepth,
)
from snpvault.genomics import encode_genotype as g
from snpvault.genomics import encode_phenotype
from snpvault.index_tree import QueryPredicate, build_tree, naive_count, trace_query
from snpvault.paillier import PaillierCiphertext, decrypt
from snpvault.protocol import (
    CloudServer,
    EncryptedQuery,
    ProtocolConfig,
    Researcher,
    ci_encrypt_tree,
    ci_upload_tree,
    cs_execute_query,
    decode_query,
    deserialize_tree,
    encode_query,
    load_encrypted_tree,
    researcher_decrypt_result,
    researcher_encrypt_query,
    run_count_query,
    run_protocol,
    save_encrypted_tree,
    serialize_tree,
)
from snpvault.index_tree import QueryTrace
from snpvault.transport import LoopbackChannel, MessageType, Transcript
from strategies import datasets, predicates

POS = encode_phenotype("Positive")
FOUR_TERM = QueryPredicate.of({2: g("CC"), 3: g("TT"), 5: g("CC"), 6: POS})
PATH_ONE = QueryPredicate.of({1: g("GG"), 3: g("TT"), 5: g("CC"), 6: POS})


def _shape(node):
    return (node.sid, [_shape(c) for c in node.children])


def _query(enc_tree, predicate, keys, rng, transcript=None, mask_bits=64):
    """CS on a thread, researcher in the caller; returns (count, trace)."""
    pk, sk = keys
    server = CloudServer(enc_tree, rng=random.Random(rng.random()))
    r_end, cs_end = LoopbackChannel.pair("R", "CS", transcript)
    t = threading.Thread(target=server.handle, args=(cs_end,), daemon=True)
    t.start()
    try:
        count = Researcher(pk, sk, mask_bits, rng).query(r_end, predicate)
    finally:
        r_end.close()
        t.join()
    return count, server.traces.get(0)


@pytest.fixture(scope="module")
def enc_cohort10(cohort10, keys):
    pk, sk = keys
    return ci_encrypt_tree(build_tree(cohort10), pk, random.Random(1), secret_key=sk)


# -- tree encryption ----------------------------------------------------------

def test_encryption_is_probabilistic(cohort10, keys):
    pk, sk = keys
    tree = build_tree(cohort10)
    a = ci_encrypt_tree(tree, pk, random.Random(1))
    b = ci_encrypt_tree(tree, pk, random.Random(2), secret_key=sk)
    assert _shape(a.root) == _shape(b.root) == _shape(tree.root)
    for (_, x), (_, y) in zip(a.iter_nodes(), b.iter_nodes()):
        assert x.enc_val != y.enc_val and x.enc_count != y.enc_count


def test_encrypted_nodes_decrypt_to_plaintext(cohort10, keys, enc_cohort10):
    _, sk = keys
    plain = list(build_tree(cohort10).iter_nodes())
    enc = list(enc_cohort10.iter_nodes())
    assert len(plain) == len(enc) == len(enc_cohort10)
    for (p_pos, p), (e_pos, e) in zip(plain, enc):
        assert p_pos == e_pos and p.sid == e.sid
        assert (decrypt(sk, e.enc_val), decrypt(sk, e.enc_count)) == (p.val, p.count)


def test_level_one_counts(keys, enc_cohort10):
    _, sk = keys
    got = {decrypt(sk, c.enc_val): decrypt(sk, c.enc_count) for c in enc_cohort10.root.children}
    assert got == {g("AG"): 5, g("AA"): 3, g("GG"): 2}


def test_root_is_a_bare_sentinel(enc_cohort10):
    assert enc_cohort10.root.sid == 0
    assert enc_cohort10.root.enc_val is None and enc_cohort10.root.enc_count is None


@given(datasets(min_records=1, max_records=30, max_snps=4))
@settings(max_examples=20)
def test_encryption_isomorphic_random(keys, data):
    pk, sk = keys
    tree = build_tree(data)
    enc = ci_encrypt_tree(tree, pk, random.Random(0), secret_key=sk)
    assert _shape(enc.root) == _shape(tree.root)


# -- query encryption -----------------------------------------------------------

def test_query_encryption_example(keys, rng):
    pk, sk = keys
    pred = QueryPredicate.of({2: g("CC"), 4: g("AG"), 6: POS})
    q = researcher_encrypt_query(pred, pk, rng)
    assert q.sids == (2, 4, 6)
    assert [decrypt(sk, ct) for _, ct in q.terms] == [g("CC"), g("AG"), POS]
    assert all(ct.c > 2**32 for _, ct in q.terms)


def test_empty_query(keys, rng):
    assert researcher_encrypt_query(QueryPredicate(), keys[0], rng).terms == ()


def test_duplicate_sid():
    with pytest.raises(InvalidPredicate):
        QueryPredicate(((2, 1), (2, 3)))


def test_query_codec(keys, rng):
    pk, _ = keys
    q = researcher_encrypt_query(FOUR_TERM, pk, rng)
    back, bits = decode_query(pk, encode_query(pk, q, 64))
    assert bits == 64 and back.terms == q.terms and back.plain is None


def test_query_codec_rejects_unordered(keys, rng):
    pk, _ = keys
    q = researcher_encrypt_query(FOUR_TERM, pk, rng)
    swapped = EncryptedQuery((q.terms[1], q.terms[0]))
    with pytest.raises(ProtocolError):
        decode_query(pk, encode_query(pk, swapped, 64))


# -- traversal ------------------------------------------------------------------

@pytest.mark.parametrize(
    "predicate, expected",
    [
        (FOUR_TERM, 2),
        (PATH_ONE, 1),
        (QueryPredicate.of({1: g("AG")}), 5),
        (QueryPredicate.of({1: g("TT")}), 0),
        (QueryPredicate(), 10),
    ],
)
def test_cohort10_counts(enc_cohort10, keys, rng, predicate, expected):
    count, _ = _query(enc_cohort10, predicate, keys, rng)
    assert count == expected


def test_no_match_prunes(cohort10, enc_cohort10, keys, rng):
    pred = QueryPredicate.of({2: g("TT"), 4: g("AA")})
    count, trace = _query(enc_cohort10, pred, keys, rng)
    assert count == 0
    assert trace.accumulated == []
    # nothing at SNP4 is compared because no SNP2 node matched
    tree = build_tree(cohort10)
    assert {len(p) for p in trace.compared} == {2}
    assert len(trace.compared) == len(tree.level(2))


def test_traversal_matches_plaintext_reference(cohort10, enc_cohort10, keys, rng):
    tree = build_tree(cohort10)
    for pred in (FOUR_TERM, PATH_ONE, QueryPredicate.of({3: g("TT")})):
        _, trace = _query(enc_cohort10, pred, keys, rng)
        ref = trace_query(tree, pred)
        assert trace.compared == ref.compared
        assert trace.accumulated == ref.accumulated


def test_result_is_rerandomised(keys, rng):
    pk, sk = keys
    from snpvault.genomics import Dataset, Record

    data = Dataset(1, (Record((1,), 1),))
    enc = ci_encrypt_tree(build_tree(data), pk, rng, secret_key=sk)
    q = researcher_encrypt_query(QueryPredicate.of({1: 1}), pk, rng)
    r_end, cs_end = LoopbackChannel.pair("R", "CS")
    out = {}
    t = threading.Thread(target=lambda: out.setdefault("c", cs_execute_query(enc, q, cs_end, rng=rng)))
    t.start()
    from snpvault.secure_compare.masked import decode_masked_value, researcher_compare

    frame = r_end.expect(MessageType.MASKED_VALUE)
    _, masked = decode_masked_value(pk, frame.payload)
    researcher_compare(r_end, 0, sk, masked, 1, 64, random.Random(5))
    t.join()
    leaf = enc.root.children[0]
    assert researcher_decrypt_result(out["c"], sk) == 1
    assert out["c"] != leaf.enc_count


def test_sid_beyond_depth(enc_cohort10, keys, rng):
    with pytest.raises(SidBeyondDepth):
        _query(enc_cohort10, QueryPredicate.of({99: 1}), keys, rng)


def test_sid_beyond_depth_direct(enc_cohort10, keys, rng):
    q = researcher_encrypt_query(QueryPredicate.of({7: 1}), keys[0], rng)
    a, _ = LoopbackChannel.pair()
    with pytest.raises(SidBeyondDepth):
        cs_execute_query(enc_cohort10, q, a, rng=rng)


def test_query_without_tree(keys, rng):
    server = CloudServer()
    r_end, cs_end = LoopbackChannel.pair("R", "CS")
    t = threading.Thread(target=server.handle, args=(cs_end,), daemon=True)
    t.start()
    with pytest.raises(ProtocolError, match="no encrypted tree"):
        Researcher(*keys, rng=rng).query(r_end, FOUR_TERM)
    r_end.close()
    t.join()


def test_server_survives_errors(enc_cohort10, keys, rng):
    server = CloudServer(enc_cohort10, rng=random.Random(0))
    r_end, cs_end = LoopbackChannel.pair("R", "CS")
    t = threading.Thread(target=server.handle, args=(cs_end,), daemon=True)
    t.start()
    researcher = Researcher(*keys, rng=rng)
    with pytest.raises(SidBeyondDepth):
        researcher.query(r_end, QueryPredicate.of({9: 1}), session=0)
    assert researcher.query(r_end, FOUR_TERM, session=1) == 2
    r_end.close()
    t.join()


def test_concurrent_sessions(enc_cohort10, keys):
    server = CloudServer(enc_cohort10, rng=random.Random(0))
    results, errors = {}, []

    def client(i, pred):
        r_end, cs_end = LoopbackChannel.pair("R", "CS")
        t = threading.Thread(target=server.handle, args=(cs_end,), daemon=True)
        t.start()
        try:
            results[i] = Researcher(*keys, rng=random.Random(i)).query(r_end, pred, session=i)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)
        finally:
            r_end.close()
            t.join()

    preds = [FOUR_TERM, PATH_ONE, QueryPredicate.of({1: g("AG")}), QueryPredicate()]
    threads = [threading.Thread(target=client, args=(i, p)) for i, p in enumerate(preds)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    assert results == {0: 2, 1: 1, 2: 5, 3: 10}


@given(st.data())
@settings(max_examples=40)
def test_random_instances_match_oracle(keys, data):
    dataset = data.draw(datasets(min_records=1, max_records=40, max_snps=5))
    pred = data.draw(predicates(dataset, max_terms=4))
    rng = random.Random(data.draw(st.integers()))
    enc = ci_encrypt_tree(build_tree(dataset), keys[0], rng, secret_key=keys[1])
    count, trace = _query(enc, pred, keys, rng, mask_bits=16)
    ref = trace_query(build_tree(dataset), pred)
    assert count == naive_count(dataset, pred) == ref.count
    assert trace.compared == ref.compared and trace.accumulated == ref.accumulated


# -- end to end -----------------------------------------------------------------

@pytest.mark.parametrize("transport", ["memory", "socket"])
def test_run_count_query(cohort10, transport):
    cfg = ProtocolConfig(seed=3, transport=transport)
    count, transcript = run_count_query(cohort10, FOUR_TERM, cfg)
    assert count == 2
    masked = transcript.of_type(MessageType.MASKED_VALUE)
    compared = trace_query(build_tree(cohort10), FOUR_TERM).compared
    assert len(masked) == len(compared) >= 1
    assert transcript.total_bytes == transcript.counter.total


def test_empty_predicate_counts_records(cohort10):
    count, transcript = run_count_query(cohort10, QueryPredicate(), ProtocolConfig(seed=1))
    assert count == cohort10.n_records
    assert not transcript.of_type(MessageType.MASKED_VALUE)


def test_transports_are_equivalent(cohort10):
    runs = [run_protocol(cohort10, FOUR_TERM, ProtocolConfig(seed=11, transport=t))
            for t in ("memory", "socket")]
    assert runs[0].count == runs[1].count == 2
    assert runs[0].transcript.signature() == runs[1].transcript.signature()
    assert runs[0].trace == runs[1].trace


def test_run_is_deterministic_under_seed(cohort10):
    a = run_protocol(cohort10, PATH_ONE, ProtocolConfig(seed=5, keep_payloads=True))
    b = run_protocol(cohort10, PATH_ONE, ProtocolConfig(seed=5, keep_payloads=True))
    assert [e.payload for e in a.transcript.entries] == [e.payload for e in b.transcript.entries]


def test_message_flow_order(cohort10):
    res = run_protocol(cohort10, FOUR_TERM, ProtocolConfig(seed=2))
    types = [e.type for e in res.transcript.entries]
    assert types[-1] == MessageType.RESULT
    assert types.index(MessageType.TREE_ACK) < types.index(MessageType.QUERY_START)
    body = types[types.index(MessageType.QUERY_START) + 1:-1]
    cycle = [MessageType.MASKED_VALUE, MessageType.GARBLED_CIRCUIT,
             MessageType.OT_RECEIVER_MSG, MessageType.OT_SENDER_MSG]
    assert body == cycle * (len(body) // 4)


@pytest.mark.parametrize("predicate", [FOUR_TERM, PATH_ONE, QueryPredicate.of({1: g("AG")})])
def test_transcript_leaks_nothing(cohort10, predicate):
    res = run_protocol(cohort10, predicate, ProtocolConfig(seed=7, keep_payloads=True))
    assert audit(res, build_tree(cohort10), 64) == []


def test_audit_catches_a_plaintext_leak(cohort10):
    res = run_protocol(cohort10, FOUR_TERM, ProtocolConfig(seed=7, keep_payloads=True))
    e = next(e for e in res.transcript.entries if e.type == MessageType.QUERY_START)
    # forge a query that carries a genotype code in the clear
    forged = EncryptedQuery(((2, PaillierCiphertext(g("CC"))),))
    e.payload = encode_query(res.pk, forged, 64)
    assert audit(res, build_tree(cohort10), 64)


# -- serialization ----------------------------------------------------------------

def test_tree_serialization_roundtrip(enc_cohort10, tmp_path):
    blob = serialize_tree(enc_cohort10)
    assert blob[:4] == b"SNPT"
    back = deserialize_tree(blob)
    assert back == enc_cohort10
    path = tmp_path / "tree.enc"
    save_encrypted_tree(path, enc_cohort10)
    assert load_encrypted_tree(path) == enc_cohort10


@pytest.mark.parametrize("cut", [0, 3, 10, -1])
def test_truncated_tree_rejected(enc_cohort10, cut):
    blob = serialize_tree(enc_cohort10)
    with pytest.raises(DecodeFailure):
        deserialize_tree(blob[:cut] if cut else b"XXXX" + blob[4:])


def test_trailing_garbage_rejected(enc_cohort10):
    with pytest.raises(DecodeFailure):
        deserialize_tree(serialize_tree(enc_cohort10) + b"\x00")


def test_chunked_upload(enc_cohort10):
    server = CloudServer()
    ci_end, cs_end = LoopbackChannel.pair("CI", "CS")
    t = threading.Thread(target=server.handle, args=(cs_end,), daemon=True)
    t.start()
    assert ci_upload_tree(ci_end, enc_cohort10, chunk_size=97) == len(enc_cohort10)
    ci_end.close()
    t.join()
    assert server.enc_tree == enc_cohort10
