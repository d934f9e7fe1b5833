"""Benchmark the compiled kernels against their pure-Python fallbacks.

Runs the two hot paths -- gazetteer scanning and the Jacobi eigensolver --
on synthetic workloads with both backends, checks that they agree, and
prints per-backend timings with the speedup.

Usage: python benchmarks/bench_kernels.py [--docs N] [--words N] [--repeat N]
"""

import argparse
import random
import time

import numpy as np

from phenotext import _native
from phenotext.lexicon import TermScanner, load_builtin_lexicon
from phenotext.pca import jacobi_eigh

FILLER = (
    "patient denies reports history of no acute distress stable on exam "
    "follow up in clinic continues daily as needed without with mild severe "
    "chronic left right bilateral status post admitted discharged home"
).split()


def make_documents(lexicon, n_docs: int, n_words: int, seed: int) -> list[str]:
    """Normalized notes mixing lexicon phrases (~1 in 6 words) with filler."""
    rng = random.Random(seed)
    docs = []
    for _ in range(n_docs):
        words: list[str] = []
        while len(words) < n_words:
            if rng.random() < 1 / 6:
                words.extend(rng.choice(lexicon.terms).split())
            else:
                words.append(rng.choice(FILLER))
        docs.append(" ".join(words[:n_words]))
    return docs


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def report(name: str, pure_s: float, compiled_s: float | None) -> None:
    print(f"{name}")
    print(f"  pure-python  {pure_s * 1000:10.2f} ms")
    if compiled_s is None:
        print("  compiled     unavailable (extension not built)")
    else:
        print(f"  compiled     {compiled_s * 1000:10.2f} ms   ({pure_s / compiled_s:.1f}x faster)")
    print()


def bench_scanner(n_docs: int, n_words: int, repeat: int) -> None:
    lexicon = load_builtin_lexicon()
    docs = make_documents(lexicon, n_docs, n_words, seed=7)
    pure = TermScanner(lexicon, backend="pure-python")
    hits = sum(len(pure.scan_indices(d)) for d in docs)
    print(f"scan: {n_docs} notes x {n_words} words, {len(lexicon)} terms, {hits} total hits")

    compiled_s = None
    if _native.HAVE_COMPILED:
        comp = TermScanner(lexicon, backend="compiled")
        for d in docs:
            assert comp.scan_indices(d) == pure.scan_indices(d)
        compiled_s = best_of(lambda: [comp.scan_indices(d) for d in docs], repeat)
    pure_s = best_of(lambda: [pure.scan_indices(d) for d in docs], repeat)
    report("term scanning", pure_s, compiled_s)


def bench_jacobi(sizes: list[int], repeat: int) -> None:
    rng = np.random.default_rng(11)
    for n in sizes:
        m = rng.standard_normal((n, n))
        sym = (m + m.T) / 2.0
        print(f"jacobi_eigh: {n}x{n} symmetric matrix")

        compiled_s = None
        if _native.HAVE_COMPILED:
            vals_c, _ = jacobi_eigh(sym, backend="compiled")
            vals_p, _ = jacobi_eigh(sym, backend="pure-python")
            assert np.allclose(vals_c, vals_p, atol=1e-9)
            compiled_s = best_of(lambda: jacobi_eigh(sym, backend="compiled"), repeat)
        pure_s = best_of(lambda: jacobi_eigh(sym, backend="pure-python"), repeat)
        report("jacobi sweep", pure_s, compiled_s)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=200, help="notes to scan")
    parser.add_argument("--words", type=int, default=400, help="words per note")
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats (best kept)")
    parser.add_argument(
        "--sizes", type=int, nargs="+", default=[40, 80], help="jacobi matrix sizes"
    )
    args = parser.parse_args()

    print(f"active backend: {_native.BACKEND}\n")
    bench_scanner(args.docs, args.words, args.repeat)
    bench_jacobi(args.sizes, args.repeat)


if __name__ == "__main__":
    main()
