"""Plaintext prefix index over SNP records, plus the counting oracles.

Level ``k`` of the tree holds column ``k`` of the records (SNP columns,
then the phenotype), so every root-to-leaf path has ``n_snps + 1`` nodes.
A node's ``count`` is the number of records sharing the path prefix that
ends at it.  A conjunctive count query is answered by summing the counts
of the matching nodes at the deepest queried level.
"""

from dataclasses import dataclass

from .errors import DepthMismatch, EmptyDataset, InvalidPredicate, SidOutOfRange
from .genomics import decode_genotype, decode_phenotype, encode_genotype, encode_phenotype


class TreeNode:
    __slots__ = ("sid", "val", "count", "children")

    def __init__(self, sid, val, count=0, children=None):
        self.sid = sid
        self.val = val
        self.count = count
        self.children = children if children is not None else []

    def child(self, val):
        for c in self.children:
            if c.val == val:
                return c
        return None

    def __repr__(self):
        return f"TreeNode(sid={self.sid}, val={self.val}, count={self.count}, children={len(self.children)})"


class IndexTree:
    """Root sentinel plus depth.  Treat as read-only once built."""

    __slots__ = ("root", "depth")

    def __init__(self, root, depth):
        self.root = root
        self.depth = depth

    @property
    def n_snps(self):
        return self.depth - 1

    @property
    def n_records(self):
        return sum(c.count for c in self.root.children)

    def level(self, k):
        """All nodes at level ``k`` (1-based), in preorder."""
        frontier = [self.root]
        for _ in range(k):
            frontier = [c for n in frontier for c in n.children]
        return frontier

    def iter_nodes(self):
        """Yield ``(position, node)`` in preorder; position is the child-index path."""
        stack = [((i,), c) for i, c in reversed(list(enumerate(self.root.children)))]
        while stack:
            pos, node = stack.pop()
            yield pos, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((pos + (i,), node.children[i]))

    def __len__(self):
        return sum(1 for _ in self.iter_nodes())


@dataclass(frozen=True)
class QueryPredicate:
    """Conjunction of ``sid == val`` terms, stored with sids ascending."""

    terms: tuple = ()

    def __post_init__(self):
        terms = tuple((int(s), int(v)) for s, v in self.terms)
        sids = [s for s, _ in terms]
        if len(set(sids)) != len(sids):
            raise InvalidPredicate(f"duplicate sid in predicate {terms}")
        if any(s < 1 for s in sids):
            raise InvalidPredicate("sids are 1-based")
        object.__setattr__(self, "terms", tuple(sorted(terms)))

    @classmethod
    def of(cls, mapping):
        return cls(tuple(mapping.items()))

    @classmethod
    def parse(cls, spec, n_snps=None):
        """Parse ``SNP2=CC,SNP3=TT,PHENO=Positive``.

        ``PHENO`` needs ``n_snps`` to resolve to its sid.
        """
        terms = []
        for part in filter(None, (p.strip() for p in spec.split(","))):
            key, sep, value = part.partition("=")
            if not sep:
                raise InvalidPredicate(f"term {part!r} is not KEY=VALUE")
            key, value = key.strip().upper(), value.strip()
            if key in ("PHENO", "PHENOTYPE", "CANCER"):
                if n_snps is None:
                    raise InvalidPredicate("PHENO term needs the number of SNPs")
                terms.append((n_snps + 1, encode_phenotype(value)))
            elif key.startswith("SNP"):
                try:
                    sid = int(key[3:].lstrip("_"))
                except ValueError:
                    raise InvalidPredicate(f"bad SNP key {key!r}") from None
                terms.append((sid, encode_genotype(value)))
            else:
                raise InvalidPredicate(f"unknown column {key!r}")
        return cls(tuple(terms))

    @property
    def sids(self):
        return tuple(s for s, _ in self.terms)

    @property
    def max_sid(self):
        return self.terms[-1][0] if self.terms else 0

    def as_dict(self):
        return dict(self.terms)

    def __len__(self):
        return len(self.terms)


def _insert_inplace(root, values):
    node = root
    for sid, val in enumerate(values, start=1):
        nxt = None
        for c in node.children:
            if c.val == val:
                nxt = c
                break
        if nxt is None:
            nxt = TreeNode(sid, val, 0)
            node.children.append(nxt)
        nxt.count += 1
        node = nxt


def build_tree(dataset):
    if not dataset.records:
        raise EmptyDataset("cannot build an index tree from an empty dataset")
    root = TreeNode(0, 0)
    for rec in dataset.records:
        _insert_inplace(root, rec.values)
    root.count = len(dataset.records)
    return IndexTree(root, dataset.n_snps + 1)


def insert_record(tree, record):
    """Return a new tree with ``record`` added; ``tree`` is left untouched.

    Only the nodes on the inserted path are copied, the rest is shared.
    """
    values = record.values
    if len(values) != tree.depth:
        raise DepthMismatch(f"record spans {len(values)} levels, tree has {tree.depth}")
    old = tree.root
    new_root = TreeNode(0, 0, old.count + 1, list(old.children))
    parent = new_root
    for sid, val in enumerate(values, start=1):
        for i, c in enumerate(parent.children):
            if c.val == val:
                copy = TreeNode(c.sid, c.val, c.count + 1, list(c.children))
                parent.children[i] = copy
                break
        else:
            copy = TreeNode(sid, val, 1)
            parent.children.append(copy)
        parent = copy
    return IndexTree(new_root, tree.depth)


def _check_sids(predicate, depth):
    if predicate.terms and predicate.max_sid > depth:
        raise SidOutOfRange(f"sid {predicate.max_sid} beyond {depth} columns")


def naive_count(dataset, predicate):
    """Reference oracle: scan every record."""
    _check_sids(predicate, dataset.n_snps + 1)
    terms = [(s - 1, v) for s, v in predicate.terms]
    return sum(1 for rec in dataset.records if all(rec.values[i] == v for i, v in terms))


@dataclass
class QueryTrace:
    """Which node positions a traversal compared, and which it summed."""

    compared: list
    accumulated: list
    count: int


def trace_query(tree, predicate):
    """Plaintext version of the encrypted traversal.

    Depth-first, children in stored order.  Nodes at queried sids are
    compared (only reached if every queried ancestor matched); unqueried
    levels are descended unconditionally; matches at the deepest queried
    sid contribute their count.
    """
    _check_sids(predicate, tree.depth)
    if not predicate.terms:
        kids = tree.root.children
        return QueryTrace([], [(i,) for i in range(len(kids))], sum(c.count for c in kids))
    want = predicate.as_dict()
    max_sid = predicate.max_sid
    compared, accumulated, total = [], [], 0
    stack = [((i,), c) for i, c in reversed(list(enumerate(tree.root.children)))]
    while stack:
        pos, node = stack.pop()
        target = want.get(node.sid)
        if target is not None:
            compared.append(pos)
            if node.val != target:
                continue
            if node.sid == max_sid:
                accumulated.append(pos)
                total += node.count
                continue
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((pos + (i,), node.children[i]))
    return QueryTrace(compared, accumulated, total)


def tree_count_plaintext(tree, predicate):
    return trace_query(tree, predicate).count


def leaf_paths(tree):
    """Root-to-leaf value tuples, each repeated by its leaf count."""
    out = []
    stack = [(c, (c.val,)) for c in reversed(tree.root.children)]
    while stack:
        node, path = stack.pop()
        if not node.children:
            out.extend([path] * node.count)
        for c in reversed(node.children):
            stack.append((c, path + (c.val,)))
    return out


def _label(node, depth):
    if node.sid == depth:
        return decode_phenotype(node.val)
    return decode_genotype(node.val)


def dump_tree(tree):
    """Indented text rendering, one ``sid=.. val=.. count=..`` line per node."""
    lines = []
    for pos, node in tree.iter_nodes():
        indent = "  " * (len(pos) - 1)
        lines.append(f"{indent}sid={node.sid} val={_label(node, tree.depth)} count={node.count}")
    return "\n".join(lines) + ("\n" if lines else "")
