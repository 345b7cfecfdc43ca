"""Command-line entry points: one command per party plus the benchmark."""

import os
import sys
import time

import click

from . import bench as bench_mod
from .errors import SnpVaultError
from .genomics import load_dataset
from .index_tree import QueryPredicate, build_tree, dump_tree
from .paillier import (
    keygen,
    read_key_fields,
    read_secret_key,
    write_public_key,
    write_secret_key,
)
from .protocol import (
    CloudServer,
    Researcher,
    ci_encrypt_tree,
    load_encrypted_tree,
    save_encrypted_tree,
)
from .rand import TEST_SEED_ENV, seeded_rng, system_rng
from .secure_compare.masked import DEFAULT_MASK_BITS
from .transport import connect, listen

DEFAULT_ADDRESS = "127.0.0.1:7070"


def _fail(exc):
    raise click.ClickException(f"{type(exc).__name__}: {exc}")


def _rng(seed):
    if seed is None and TEST_SEED_ENV not in os.environ:
        return system_rng()
    return seeded_rng(0 if seed is None else seed, "cli")


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers") from None


def _note(msg):
    click.echo(msg, err=True)


@click.group()
@click.version_option(package_name="snpvault")
def main():
    """Secure count queries over an encrypted SNP index tree."""


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--tree-out", type=click.Path(dir_okay=False), help="Write the tree dump here instead of stdout.")
def build(dataset, tree_out):
    """Build the plaintext index tree of DATASET and print it."""
    try:
        start = time.perf_counter()
        data = load_dataset(dataset)
        read_s = time.perf_counter() - start
        start = time.perf_counter()
        tree = build_tree(data)
        build_s = time.perf_counter() - start
    except (SnpVaultError, OSError) as exc:
        _fail(exc)
    text = dump_tree(tree)
    if tree_out:
        with open(tree_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    _note(f"read {data.n_records} records in {read_s:.3f}s, built {len(tree)} nodes in {build_s:.3f}s")


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--key-bits", type=int, default=1024, show_default=True)
@click.option("--seed", type=int, default=None, help="Seeded (insecure) randomness; allows keys below 1024 bits.")
def ci(dataset, out_dir, key_bits, seed):
    """Key generation, tree build and encryption.

    Writes secret.key, public.key and tree.enc into OUT_DIR.
    """
    rng = _rng(seed)
    try:
        data = load_dataset(dataset)
        start = time.perf_counter()
        pk, sk = keygen(key_bits, rng)
        keygen_s = time.perf_counter() - start
        start = time.perf_counter()
        tree = build_tree(data)
        build_s = time.perf_counter() - start
        start = time.perf_counter()
        enc_tree = ci_encrypt_tree(tree, pk, rng, secret_key=sk)
        encrypt_s = time.perf_counter() - start
        os.makedirs(out_dir, exist_ok=True)
        write_secret_key(os.path.join(out_dir, "secret.key"), sk, snps=data.n_snps)
        write_public_key(os.path.join(out_dir, "public.key"), pk, snps=data.n_snps)
        save_encrypted_tree(os.path.join(out_dir, "tree.enc"), enc_tree)
    except (SnpVaultError, OSError, ValueError) as exc:
        _fail(exc)
    _note(f"keygen {keygen_s:.3f}s, build {build_s:.3f}s, encrypt {encrypt_s:.3f}s ({len(tree)} nodes)")
    click.echo(out_dir)


@main.command()
@click.argument("tree_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--address", default=DEFAULT_ADDRESS, show_default=True, help="HOST:PORT to listen on (port 0 picks one).")
@click.option("--seed", type=int, default=None)
def serve(tree_path, address, seed):
    """Serve query sessions over the encrypted tree in TREE_PATH."""
    try:
        enc_tree = load_encrypted_tree(tree_path)
        listener = listen(address)
    except (SnpVaultError, OSError) as exc:
        _fail(exc)
    server = CloudServer(enc_tree, rng=None if seed is None else seeded_rng(seed, "cs"))
    host, port = listener.address
    click.echo(f"listening on {host}:{port}")
    sys.stdout.flush()
    try:
        listener.serve_forever(server.handle)
    except KeyboardInterrupt:
        pass
    finally:
        listener.close()


@main.command()
@click.argument("predicate")
@click.option("--server", "address", default=DEFAULT_ADDRESS, show_default=True)
@click.option("--key", "key_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--snps", type=int, default=None, help="SNP columns (defaults to the key file's snps field).")
@click.option("--mask-bits", type=int, default=DEFAULT_MASK_BITS, show_default=True)
@click.option("--seed", type=int, default=None)
def query(predicate, address, key_path, snps, mask_bits, seed):
    """Run one count query, e.g. 'SNP2=CC,SNP3=TT,SNP5=CC,PHENO=Positive'."""
    try:
        sk = read_secret_key(key_path)
        if snps is None:
            snps = read_key_fields(key_path).get("snps")
        pred = QueryPredicate.parse(predicate, snps)
        researcher = Researcher(sk.public_key, sk, mask_bits, _rng(seed))
        start = time.perf_counter()
        with connect(address) as channel:
            connect_s = time.perf_counter() - start
            start = time.perf_counter()
            count = researcher.query(channel, pred)
            query_s = time.perf_counter() - start
            nbytes = channel.bytes_sent + channel.bytes_received
    except (SnpVaultError, OSError, ValueError) as exc:
        _fail(exc)
    click.echo(count)
    _note(f"connect {connect_s:.3f}s, query {query_s:.3f}s, {nbytes} bytes exchanged")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON bench config.")
@click.option("--records", callback=_int_list, help="Comma-separated record counts.")
@click.option("--snps", callback=_int_list, help="Comma-separated SNP counts.")
@click.option("--query-size", callback=_int_list, help="Comma-separated query sizes.")
@click.option("--reps", type=int)
@click.option("--seed", type=int)
@click.option("--key-bits", type=int)
@click.option("--paper-keys", is_flag=True, help="Use 1024-bit keys.")
@click.option("--mask-bits", type=int)
@click.option("--out", type=click.Path(dir_okay=False), help="CSV path (default stdout).")
@click.option("--quiet", is_flag=True)
def bench(config_path, records, snps, query_size, reps, seed, key_bits, paper_keys, mask_bits, out, quiet):
    """Run the benchmark grid and write one CSV row per scenario and phase."""
    try:
        base = bench_mod.BenchConfig.load(config_path).to_dict() if config_path else {}
        overrides = {
            "records": records,
            "snps": snps,
            "query_sizes": query_size,
            "reps": reps,
            "seed": seed,
            "key_bits": 1024 if paper_keys else key_bits,
            "mask_bits": mask_bits,
            "out": out,
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        config = bench_mod.BenchConfig.from_dict(base)
        rows = bench_mod.run_bench(config, progress=None if quiet else _note)
    except (SnpVaultError, OSError, ValueError) as exc:
        _fail(exc)
    if config.out:
        bench_mod.write_csv(rows, config.out)
        _note(f"wrote {len(rows)} rows to {config.out}")
    else:
        bench_mod.write_csv(rows, sys.stdout)


if __name__ == "__main__":
    main()
