"""Time the compiled LSTM recurrence against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--hidden 100] [--length 25] [--repeat 200]

Reports the recurrence alone (forward + backward) and one full training
step of a variant-A tagger with each backend.
"""
import argparse
import timeit

import numpy as np

from ruletag.autodiff import Adam, kernels
from ruletag.embeddings import EmbeddingStore
from ruletag.models import ModelConfig, Tagger
from ruletag.synthetic import SyntheticConfig, generate_synthetic


def bench_recurrence(impl, n, h, repeat, rng):
    zx = rng.normal(size=(n, 4 * h))
    wh = rng.normal(size=(h, 4 * h)) / np.sqrt(h)
    dh = rng.normal(size=(n, h))

    def run():
        hs, cs, acts = kernels.recurrence_forward(zx, wh, impl)
        kernels.recurrence_backward(dh, acts, cs, wh, impl)

    return min(timeit.repeat(run, number=repeat, repeat=3)) / repeat


def bench_train_step(impl, h, repeat):
    sents, tags, dicts = generate_synthetic(SyntheticConfig(num_sentences=20, min_len=20, max_len=30, seed=0))
    s = sents[0]
    cfg = ModelConfig(hidden=h, dropout=0.5)
    rng = np.random.default_rng(0)
    model = Tagger.create(cfg, tags, dicts, EmbeddingStore(cfg.dim), s.words, rng)
    opt = Adam(cfg.optimizer())
    saved = kernels._impl

    def run():
        model.zero_grad()
        model.loss(s, training=True, rng=rng).backward()
        opt.step(model.params, model.grads())

    kernels._impl = impl
    try:
        return min(timeit.repeat(run, number=repeat, repeat=3)) / repeat, len(s)
    finally:
        kernels._impl = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, default=100)
    ap.add_argument("--length", type=int, default=25)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    impls = kernels.backends()
    print(f"default backend: {kernels.BACKEND}")
    if "cython" not in impls:
        print("compiled kernel not built; only the fallback is timed")
    rng = np.random.default_rng(0)

    rec = {name: bench_recurrence(impl, args.length, args.hidden, args.repeat, rng) for name, impl in impls.items()}
    step = {name: bench_train_step(impl, args.hidden, max(1, args.repeat // 10)) for name, impl in impls.items()}

    print(f"\nrecurrence fwd+bwd, n={args.length}, h={args.hidden}")
    for name, t in rec.items():
        print(f"  {name:<8}{t * 1e6:10.1f} us")
    n_tokens = next(iter(step.values()))[1]
    print(f"\ntraining step (variant A, {n_tokens} tokens, h={args.hidden})")
    for name, (t, _) in step.items():
        print(f"  {name:<8}{t * 1e3:10.2f} ms")
    if "cython" in impls:
        print(f"\nspeedup: recurrence {rec['python'] / rec['cython']:.2f}x, "
              f"training step {step['python'][0] / step['cython'][0]:.2f}x")


if __name__ == "__main__":
    main()
