"""Command-line entry point: analyze, simulate, recover, roundtrip, vectors."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import analysis
from .bch import bch_for_message, bch_generate
from .block_recovery import (
    BlockGeometry,
    WordStore,
    encode_block,
    read_block_file,
    recover_block,
    write_block_file,
)
from .bwpc import PageCodeword, decode_page, encode_page, erasure_symbols, inner_decode
from .errors import CodecError, ConfigError, ConstructionError, PageFailure
from .galois import gf_build
from .raptor import RaptorCode, RaptorParams
from .sim import (
    CSV_COLUMNS,
    PointResult,
    _csv_row,
    build_scheme,
    load_config,
    run_experiment,
    trial_rng,
)

EXIT_CONFIG = 2
EXIT_CONSTRUCTION = 3
EXIT_IO = 4

# worked erasure example: five coded symbols over four sources
EXAMPLE_MATRIX = [[0, 1, 0, 1], [1, 0, 1, 1], [0, 1, 0, 0], [0, 0, 1, 1], [1, 0, 0, 1]]


def _cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    scheme = build_scheme(cfg)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        out.write(",".join(CSV_COLUMNS) + "\n")
        for value in cfg.grid:
            t0 = time.perf_counter()
            a11, apf, apr = scheme.analytic(value)
            row = PointResult(cfg.scheme, float(value), 0, 0, 0, 0, math.nan, math.nan,
                              a11, apf, apr, time.perf_counter() - t0)
            fields = _csv_row(row).split(",")
            fields[3:8] = [""] * 5  # no trials, no frequencies
            out.write(",".join(fields) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    output = args.output or cfg.output

    def show(res):
        if not args.quiet:
            print(
                f"{res.scheme} p_e={res.p_e:g} trials={res.trials} "
                f"e2e={res.failures} inner={res.inner_failures} miss={res.miss_corrections}",
                file=sys.stderr,
            )

    report = run_experiment(cfg, workers=args.workers, output=output, progress=show)
    if not output:
        sys.stdout.write("\n".join(report.csv_lines()) + "\n")
    return 0


def _parse_indices(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _cmd_recover(args) -> int:
    if args.create:
        inner = bch_for_message(args.N_s * args.T * 8, args.t)
        geom = BlockGeometry(args.p, args.w, args.N_s, inner,
                             args.p * args.w * args.N_s + args.parity_words * args.N_s, args.T)
        code = RaptorCode.from_params(geom.raptor_params(seed=args.raptor_seed))
        rng = np.random.default_rng(args.seed)
        data = rng.integers(0, 256, (geom.n_data_words, geom.word_bytes), dtype=np.uint8)
        write_block_file(args.block, geom, encode_block(geom, code, data))
        print(f"wrote {args.block}: {geom.n_words} words of {inner.n} bits")
    geom, bits = read_block_file(args.block)
    code = RaptorCode.from_params(geom.raptor_params(seed=args.raptor_seed))
    rng = np.random.default_rng(args.seed)
    if args.fail:
        failed = _parse_indices(args.fail)
    else:
        failed = sorted(rng.choice(geom.n_data_words, args.fail_count, replace=False).tolist())
    damaged = bits.copy()
    n = geom.inner.n
    for w in failed:
        damaged[w, rng.choice(n, geom.inner.t + 1 + geom.inner.t, replace=False)] ^= 1
    reference = WordStore(geom, bits)
    store = WordStore(geom, damaged, failed=failed)
    result = recover_block(geom, code, store, method=args.method)
    ok = all(
        reference.read(w).tobytes() == data for w, data in result.words.items()
    )
    print(json.dumps({
        "failed_words": failed,
        "recovered": sorted(result.words),
        "words_read": result.reads,
        "lut_bits": result.luts.size_bits,
        "matches_original": ok,
    }))
    return 0 if ok else 1


def _cmd_roundtrip(args) -> int:
    cfg = load_config(args.config)
    if cfg.scheme != "BwPcRaptor":
        raise ConfigError("scheme", "roundtrip traces a BwPcRaptor page")
    scheme = build_scheme(cfg)
    lay, code = scheme.layout, scheme.code
    rng = trial_rng(cfg.master_seed if args.seed is None else args.seed, 0, 0)
    user = rng.integers(0, 2, lay.user_bits(code), dtype=np.uint8)
    page = encode_page(lay, code, user)
    sent = page.to_bits()
    received = sent ^ (rng.random(sent.size) < args.p_e).astype(np.uint8)
    rc = PageCodeword.from_bits(lay, received)
    _, state = inner_decode(lay, rc, scheme.max_rounds)
    trace = {
        "page_bits": int(lay.n),
        "user_bits": int(user.size),
        "bit_errors": int((sent != received).sum()),
        "inner": {
            "halted": state.halted.value,
            "rounds": state.iterations,
            "failed_rows": sorted(state.failed_rows),
            "failed_cols": sorted(state.failed_cols),
            "half_detected": state.half_detected,
            "erased_symbols": erasure_symbols(lay, state).tolist(),
        },
    }
    try:
        out = decode_page(lay, code, rc, scheme.max_rounds, retry=scheme.retry)
        trace["outer"] = {"decoded": True, "bit_errors": int((out != user).sum())}
    except PageFailure as exc:
        trace["outer"] = {"decoded": False, "reason": str(exc)}
    print(json.dumps(trace, indent=2))
    return 0


def golden_vectors() -> dict:
    example = RaptorCode.from_matrix(EXAMPLE_MATRIX, K=4)
    luts = example.erasure_luts([3])
    gen = bch_generate(gf_build(4), 15, 2)
    desk = bch_generate(gf_build(11), 1057, 3)
    msg = np.zeros(desk.k, np.uint8)
    msg[::97] = 1
    K200 = RaptorParams(K=200, N=220)
    return {
        "erasure_example": {
            "matrix": EXAMPLE_MATRIX,
            "erased": [3],
            "lut": luts.luts[0].tolist(),
            "parity_lut": example.parity_luts().to_dense().tolist(),
        },
        "bch_15_7_2": {"generator": bin(gen.generator_poly), "n": gen.n, "k": gen.k},
        "bch_1057_1024_3": {
            "generator": hex(desk.generator_poly),
            "message_ones_every": 97,
            "parity": "".join(map(str, desk.encode(msg)[desk.k:].tolist())),
        },
        "raptor_K200": {"S": K200.S, "H": K200.H, "L": K200.L},
        "conditional_failure": {
            "N_s=2,N-K=10,i=7": analysis.conditional_raptor_failure(2, 20, 10, 7),
        },
    }


def _cmd_vectors(args) -> int:
    text = json.dumps(golden_vectors(), indent=2)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raptorflash", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analytic curves for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo over the config grid")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("recover", help="block recovery drill on a block file")
    p.add_argument("--block", required=True)
    p.add_argument("--create", action="store_true", help="write a fresh random block first")
    p.add_argument("--p", type=int, default=8, help="pages per block")
    p.add_argument("--w", type=int, default=8, help="words per page")
    p.add_argument("--N_s", type=int, default=1)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--parity-words", type=int, default=12)
    p.add_argument("--raptor-seed", type=int, default=0)
    p.add_argument("--fail", help="comma-separated data word indices to break")
    p.add_argument("--fail-count", type=int, default=3)
    p.add_argument("--method", choices=("precode", "trace"), default="precode")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("roundtrip", help="trace one page through encode, BSC and decode")
    p.add_argument("--config", required=True)
    p.add_argument("--p-e", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_roundtrip)

    p = sub.add_parser("vectors", help="emit golden test vectors")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_vectors)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConstructionError as exc:
        print(f"construction error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CodecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
