"""The parties and their message flow.

CI (certified institution) generates the Paillier keys, builds the index
tree, encrypts every node's value and count, and uploads the result to the
CS (cloud server).  A researcher holding the key pair sends an encrypted
query; the CS walks the tree depth-first and, at every node whose sid is
queried, runs a masked equality test with the researcher.  Counts of the
matching nodes at the deepest queried level are summed homomorphically and
only the researcher can decrypt the total.

Payloads (integers big-endian; a ciphertext is a u32 length then a
fixed-width value)::

    TREE_UPLOAD   more-flag u8, chunk of the serialized tree
    TREE_ACK      node count u32
    QUERY_START   mask bits u8, term count u32, then (sid u32, E(val)) per term
    RESULT        E(count)
    ERROR         "ExceptionName: message" in UTF-8
"""

import io
import struct
import threading
from dataclasses import dataclass, field

from .errors import (
    ChannelClosed,
    DecodeFailure,
    ProtocolError,
    SidBeyondDepth,
    SnpVaultError,
)
from .index_tree import QueryTrace, build_tree
from .paillier import (
    FactorEncryptor,
    PaillierCiphertext,
    PublicKey,
    add_ciphertexts,
    ciphertext_from_bytes,
    ciphertext_to_bytes,
    ciphertext_wire_size,
    decrypt,
    encrypt,
    keygen,
    rerandomize,
)
from .rand import child_rng, resolve_rng, system_rng
from .secure_compare.garbling import LABEL_BYTES
from .secure_compare.masked import (
    DEFAULT_MASK_BITS,
    check_mask_bits,
    cs_compare,
    decode_garbled_message,
    decode_masked_value,
    equality_circuit,
    researcher_compare,
)
from .secure_compare.ot import POINT_BYTES
from .transport import (
    Frame,
    LoopbackChannel,
    MessageType,
    Transcript,
    connect,
    error_frame,
    listen,
)

U8 = struct.Struct(">B")
U32 = struct.Struct(">I")
TREE_MAGIC = b"SNPT"
UPLOAD_CHUNK = 16 * 1024 * 1024


# -- encrypted data ---------------------------------------------------------

@dataclass
class EncryptedTreeNode:
    sid: int
    enc_val: PaillierCiphertext
    enc_count: PaillierCiphertext
    children: list = field(default_factory=list)


@dataclass
class EncryptedTree:
    """Root sentinel (sid 0, nothing encrypted), depth and the public key."""

    root: EncryptedTreeNode
    depth: int
    pk: PublicKey

    def iter_nodes(self):
        """Yield ``(position, node)`` in preorder, as ``IndexTree.iter_nodes`` does."""
        stack = [((i,), c) for i, c in reversed(list(enumerate(self.root.children)))]
        while stack:
            pos, node = stack.pop()
            yield pos, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((pos + (i,), node.children[i]))

    def __len__(self):
        return sum(1 for _ in self.iter_nodes())


@dataclass(frozen=True)
class EncryptedQuery:
    """Terms ``(sid, E(val))`` in increasing sid order.

    ``plain`` maps sid to the value and stays with the researcher; it is
    never serialized.
    """

    terms: tuple
    plain: dict = field(default=None, compare=False, repr=False)

    @property
    def sids(self):
        return tuple(s for s, _ in self.terms)

    @property
    def max_sid(self):
        return self.terms[-1][0] if self.terms else 0

    def __len__(self):
        return len(self.terms)


def ci_encrypt_tree(tree, pk, rng=None, secret_key=None):
    """Encrypt every node's value and count with fresh randomness.

    With ``secret_key`` (holding the factors of ``n``) encryption takes the
    CRT shortcut; the ciphertext distribution is unchanged.
    """
    rng = rng or system_rng()
    if secret_key is not None and secret_key.has_factors:
        enc = FactorEncryptor(secret_key, rng).encrypt
    else:
        def enc(m):
            return encrypt(pk, m, rng)

    root = EncryptedTreeNode(0, None, None)
    stack = [(tree.root, root)]
    while stack:
        src, dst = stack.pop()
        for c in src.children:
            node = EncryptedTreeNode(c.sid, enc(c.val), enc(c.count))
            dst.children.append(node)
            stack.append((c, node))
    return EncryptedTree(root, tree.depth, pk)


def researcher_encrypt_query(predicate, pk, rng=None):
    rng = rng or system_rng()
    terms = tuple((sid, encrypt(pk, val, rng)) for sid, val in predicate.terms)
    return EncryptedQuery(terms, dict(predicate.terms))


def researcher_decrypt_result(c, sk):
    return decrypt(sk, c)


# -- serialization ----------------------------------------------------------

def _put_int(out, pk, ct):
    out.write(U32.pack(0) if ct is None else ciphertext_to_bytes(pk, ct))


def serialize_tree(enc_tree):
    """Header (magic, depth, n) then the preorder node stream."""
    pk = enc_tree.pk
    out = io.BytesIO()
    nbytes = pk.n.to_bytes((pk.n.bit_length() + 7) // 8, "big")
    out.write(TREE_MAGIC + U32.pack(enc_tree.depth) + U32.pack(len(nbytes)) + nbytes)
    stack = [enc_tree.root]
    while stack:
        node = stack.pop()
        out.write(U32.pack(node.sid))
        _put_int(out, pk, node.enc_val)
        _put_int(out, pk, node.enc_count)
        out.write(U32.pack(len(node.children)))
        stack.extend(reversed(node.children))
    return out.getvalue()


class _Reader:
    def __init__(self, data):
        self.data = memoryview(data)
        self.off = 0

    def take(self, k):
        if self.off + k > len(self.data):
            raise DecodeFailure("truncated encrypted tree")
        chunk = self.data[self.off:self.off + k]
        self.off += k
        return bytes(chunk)

    def u32(self):
        return U32.unpack(self.take(4))[0]


def deserialize_tree(data):
    r = _Reader(data)
    if r.take(4) != TREE_MAGIC:
        raise DecodeFailure("not an encrypted tree file")
    depth = r.u32()
    pk = PublicKey(int.from_bytes(r.take(r.u32()), "big"))

    def ciphertext():
        k = r.u32()
        if k == 0:
            return None
        if k != pk.ciphertext_bytes:
            raise DecodeFailure("ciphertext field has the wrong width")
        return ciphertext_from_bytes(pk, U32.pack(k) + r.take(k))

    def node():
        n = EncryptedTreeNode(r.u32(), ciphertext(), ciphertext())
        return n, r.u32()

    root, pending = node()
    stack = [(root, pending)]
    while stack:
        parent, remaining = stack[-1]
        if remaining == 0:
            stack.pop()
            continue
        stack[-1] = (parent, remaining - 1)
        child, k = node()
        if len(stack) > depth:
            raise DecodeFailure("encrypted tree deeper than its header says")
        parent.children.append(child)
        stack.append((child, k))
    if r.off != len(r.data):
        raise DecodeFailure("trailing bytes after encrypted tree")
    return EncryptedTree(root, depth, pk)


def save_encrypted_tree(path, enc_tree):
    with open(path, "wb") as fh:
        fh.write(serialize_tree(enc_tree))


def load_encrypted_tree(path):
    with open(path, "rb") as fh:
        return deserialize_tree(fh.read())


def encode_query(pk, enc_query, mask_bits):
    parts = [U8.pack(mask_bits), U32.pack(len(enc_query.terms))]
    for sid, ct in enc_query.terms:
        parts.append(U32.pack(sid))
        parts.append(ciphertext_to_bytes(pk, ct))
    return b"".join(parts)


def decode_query(pk, payload):
    width = ciphertext_wire_size(pk)
    if len(payload) < 5:
        raise DecodeFailure("QUERY_START payload truncated")
    mask_bits = payload[0]
    (count,) = U32.unpack_from(payload, 1)
    if len(payload) != 5 + count * (4 + width):
        raise DecodeFailure("QUERY_START payload length does not match its term count")
    terms, off = [], 5
    for _ in range(count):
        (sid,) = U32.unpack_from(payload, off)
        terms.append((sid, ciphertext_from_bytes(pk, payload[off + 4:off + 4 + width])))
        off += 4 + width
    sids = [s for s, _ in terms]
    if any(b <= a for a, b in zip(sids, sids[1:])) or (sids and sids[0] < 1):
        raise ProtocolError("query sids must be positive and strictly increasing")
    return EncryptedQuery(tuple(terms)), mask_bits


def payload_fields(mtype, payload, pk, mask_bits=DEFAULT_MASK_BITS):
    """Split a payload into typed fields for leakage audits.

    Returns ``[(kind, value), ...]`` with kinds ``sid``, ``length``, ``flag``,
    ``ciphertext`` (int), ``group`` / ``label`` / ``table`` / ``digest`` /
    ``masked`` (opaque bytes) and ``text``.  Raises ``DecodeFailure`` for a
    payload that does not parse under the expected schema.
    """
    if mtype == MessageType.QUERY_START:
        query, bits = decode_query(pk, payload)
        out = [("length", bits), ("length", len(query.terms))]
        for sid, ct in query.terms:
            out += [("sid", sid), ("ciphertext", ct.c)]
        return out
    if mtype == MessageType.MASKED_VALUE:
        sid, ct = decode_masked_value(pk, payload)
        return [("sid", sid), ("ciphertext", ct.c)]
    if mtype == MessageType.RESULT:
        return [("ciphertext", ciphertext_from_bytes(pk, payload).c)]
    if mtype == MessageType.GARBLED_CIRCUIT:
        setup, gc = decode_garbled_message(equality_circuit(mask_bits), payload)
        out = [("group", setup)]
        out += [("label", lbl.to_bytes()) for lbl in gc.garbler_labels]
        out += [("table", row) for rows in gc.tables for row in rows]
        out += [("digest", d) for pair in gc.decoding for d in pair]
        return out
    if mtype == MessageType.OT_RECEIVER_MSG:
        if len(payload) != mask_bits * POINT_BYTES:
            raise DecodeFailure("OT_RECEIVER_MSG length")
        return [("group", payload[i:i + POINT_BYTES]) for i in range(0, len(payload), POINT_BYTES)]
    if mtype == MessageType.OT_SENDER_MSG:
        if len(payload) != mask_bits * 2 * LABEL_BYTES:
            raise DecodeFailure("OT_SENDER_MSG length")
        return [("masked", payload[i:i + LABEL_BYTES]) for i in range(0, len(payload), LABEL_BYTES)]
    if mtype == MessageType.TREE_ACK:
        return [("length", U32.unpack(payload)[0])]
    if mtype == MessageType.ERROR:
        return [("text", payload.decode("utf-8", "replace"))]
    if mtype == MessageType.TREE_UPLOAD:
        # chunks only parse once reassembled; see tree_upload_fields
        return [("flag", payload[0]), ("chunk", payload[1:])]
    raise DecodeFailure(f"no schema for {mtype!r}")


def tree_upload_fields(blob):
    """Typed fields of a reassembled tree upload."""
    tree = deserialize_tree(blob)
    out = [("length", tree.depth), ("modulus", tree.pk.n)]
    for _, node in tree.iter_nodes():
        out += [("sid", node.sid), ("ciphertext", node.enc_val.c), ("ciphertext", node.enc_count.c)]
        out.append(("length", len(node.children)))
    return out


# -- cloud server -----------------------------------------------------------

def cs_execute_query(enc_tree, enc_query, channel, session=0, mask_bits=DEFAULT_MASK_BITS,
                     rng=None, trace=None):
    """Depth-first traversal with one masked comparison per queried node.

    Returns the re-randomized encrypted count.  ``trace`` (a ``QueryTrace``)
    collects the compared and accumulated node positions when given.
    """
    pk = enc_tree.pk
    rng = rng or system_rng()
    if enc_query.terms and enc_query.max_sid > enc_tree.depth:
        raise SidBeyondDepth(f"query sid {enc_query.max_sid} beyond tree depth {enc_tree.depth}")
    check_mask_bits(mask_bits, pk.bits)
    acc = encrypt(pk, 0, rng)
    kids = enc_tree.root.children

    if not enc_query.terms:
        for i, c in enumerate(kids):
            acc = add_ciphertexts(pk, acc, c.enc_count)
            if trace is not None:
                trace.accumulated.append((i,))
        return rerandomize(pk, acc, rng)

    wanted = set(enc_query.sids)
    max_sid = enc_query.max_sid
    stack = [((i,), c) for i, c in reversed(list(enumerate(kids)))]
    while stack:
        pos, node = stack.pop()
        if node.sid in wanted:
            tag = "cmp " + ".".join(map(str, pos))
            bit = cs_compare(channel, session, pk, node.enc_val, node.sid, mask_bits, rng, tag)
            if trace is not None:
                trace.compared.append(pos)
            if not bit:
                continue
            if node.sid == max_sid:
                acc = add_ciphertexts(pk, acc, node.enc_count)
                if trace is not None:
                    trace.accumulated.append(pos)
                continue
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((pos + (i,), node.children[i]))
    return rerandomize(pk, acc, rng)


class CloudServer:
    """Holds one encrypted tree and serves query sessions, one per channel."""

    def __init__(self, enc_tree=None, rng=None):
        self.enc_tree = enc_tree
        self.rng = rng
        self._lock = threading.Lock()
        self.traces = {}

    def _session_rng(self, session):
        if self.rng is None:
            return system_rng()
        with self._lock:
            return child_rng(self.rng, f"session-{session}")

    def handle(self, channel):
        """Serve frames until the peer closes the channel."""
        upload = []
        while True:
            try:
                frame = channel.receive()
            except ChannelClosed:
                return
            # a listener cannot tell callers apart; the first frame names the role
            channel.peer = "CI" if frame.type == MessageType.TREE_UPLOAD else "R"
            try:
                if frame.type == MessageType.TREE_UPLOAD:
                    if not frame.payload:
                        raise DecodeFailure("empty TREE_UPLOAD frame")
                    upload.append(frame.payload[1:])
                    if frame.payload[0] == 0:
                        tree = deserialize_tree(b"".join(upload))
                        upload = []
                        with self._lock:
                            self.enc_tree = tree
                        channel.send(Frame(MessageType.TREE_ACK, frame.session, U32.pack(len(tree))))
                elif frame.type == MessageType.QUERY_START:
                    self._query(channel, frame)
                else:
                    raise ProtocolError(f"unexpected {frame.type.name} outside a comparison")
            except ChannelClosed:
                return
            except SnpVaultError as exc:
                channel.send(error_frame(frame.session, exc))

    def _query(self, channel, frame):
        tree = self.enc_tree
        if tree is None:
            raise ProtocolError("no encrypted tree loaded")
        enc_query, mask_bits = decode_query(tree.pk, frame.payload)
        trace = QueryTrace([], [], None)
        result = cs_execute_query(
            tree, enc_query, channel, frame.session, mask_bits, self._session_rng(frame.session), trace
        )
        with self._lock:
            self.traces[frame.session] = trace
        channel.send(Frame(MessageType.RESULT, frame.session, ciphertext_to_bytes(tree.pk, result)))


def ci_upload_tree(channel, enc_tree, session=0, chunk_size=UPLOAD_CHUNK):
    """Send the serialized tree in chunks and wait for the acknowledgement."""
    blob = serialize_tree(enc_tree)
    chunks = [blob[i:i + chunk_size] for i in range(0, len(blob), chunk_size)]
    for i, chunk in enumerate(chunks):
        more = 1 if i < len(chunks) - 1 else 0
        channel.send(Frame(MessageType.TREE_UPLOAD, session, U8.pack(more) + chunk))
    frame = channel.expect(MessageType.TREE_ACK)
    return U32.unpack(frame.payload)[0]


# -- researcher -------------------------------------------------------------

class Researcher:
    def __init__(self, pk, sk, mask_bits=DEFAULT_MASK_BITS, rng=None):
        check_mask_bits(mask_bits, pk.bits)
        self.pk, self.sk = pk, sk
        self.mask_bits = mask_bits
        self.rng = rng or system_rng()

    def query(self, channel, predicate, session=0):
        """Run one count query over ``channel``; returns the decrypted count."""
        enc_query = researcher_encrypt_query(predicate, self.pk, self.rng)
        channel.send(
            Frame(MessageType.QUERY_START, session, encode_query(self.pk, enc_query, self.mask_bits))
        )
        while True:
            frame = channel.expect(MessageType.MASKED_VALUE, MessageType.RESULT)
            if frame.session != session:
                raise ProtocolError(f"frame for session {frame.session} inside session {session}")
            if frame.type == MessageType.RESULT:
                return researcher_decrypt_result(ciphertext_from_bytes(self.pk, frame.payload), self.sk)
            sid, masked = decode_masked_value(self.pk, frame.payload)
            if sid not in enc_query.plain:
                raise ProtocolError(f"comparison requested for unqueried sid {sid}")
            researcher_compare(
                channel, session, self.sk, masked, enc_query.plain[sid], self.mask_bits, self.rng
            )


# -- orchestration ----------------------------------------------------------

@dataclass
class ProtocolConfig:
    key_bits: int = 256
    mask_bits: int = DEFAULT_MASK_BITS
    seed: int = None
    transport: str = "memory"  # or "socket"
    keep_payloads: bool = False


@dataclass
class RunResult:
    count: int
    transcript: Transcript
    trace: QueryTrace
    pk: PublicKey
    sk: object
    enc_tree: EncryptedTree


def ci_setup(dataset, key_bits, rng):
    """Keygen, build and encrypt; returns ``(pk, sk, tree, enc_tree)``."""
    pk, sk = keygen(key_bits, rng)
    tree = build_tree(dataset)
    return pk, sk, tree, ci_encrypt_tree(tree, pk, child_rng(rng, "tree"), sk)


def run_protocol(dataset, predicate, config=None):
    """Full flow in one process: CI setup, upload, one researcher query."""
    config = config or ProtocolConfig()
    rng = resolve_rng(seed=config.seed, label="ci")
    pk, sk, _, enc_tree = ci_setup(dataset, config.key_bits, rng)
    transcript = Transcript(keep_payloads=config.keep_payloads)
    server = CloudServer(rng=child_rng(rng, "cs") if config.seed is not None else None)
    researcher = Researcher(pk, sk, config.mask_bits, child_rng(rng, "researcher"))

    if config.transport == "memory":
        ci_end, cs_ci = LoopbackChannel.pair("CI", "CS", transcript)
        r_end, cs_r = LoopbackChannel.pair("R", "CS", transcript)
        workers = [threading.Thread(target=server.handle, args=(c,), daemon=True)
                   for c in (cs_ci, cs_r)]
        for w in workers:
            w.start()
        try:
            ci_upload_tree(ci_end, enc_tree)
            ci_end.close()
            count = researcher.query(r_end, predicate)
        finally:
            ci_end.close()
            r_end.close()
            for w in workers:
                w.join()
    elif config.transport == "socket":
        with listen(("127.0.0.1", 0)) as listener:
            listener.serve_in_background(server.handle, lambda: transcript, record_inbound=False)
            with connect(listener.address, "CI", "CS", transcript, record_inbound=False) as ci_end:
                ci_upload_tree(ci_end, enc_tree)
            with connect(listener.address, "R", "CS", transcript, record_inbound=False) as r_end:
                count = researcher.query(r_end, predicate)
    else:
        raise ValueError(f"unknown transport {config.transport!r}")
    return RunResult(count, transcript, server.traces.get(0), pk, sk, enc_tree)


def run_count_query(dataset, predicate, config=None):
    """Returns ``(count, transcript)`` for one end-to-end encrypted query."""
    result = run_protocol(dataset, predicate, config)
    return result.count, result.transcript
