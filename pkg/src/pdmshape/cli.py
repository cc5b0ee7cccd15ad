"""Command-line surface: rate curves, SNR tables, parallel-channel runs, frame I/O.

Exit codes: 0 success, 1 selftest failure, 2 usage or configuration
error, 3 numerical failure, 4 data-integrity violation.  All outputs are
CSV with fixed column order and 9-significant-digit floats, so repeated
runs with the same flags are byte-identical.
"""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .allocation import ParallelChannelSet, bit_load, waterfill
from .constellation import (
    BRGC,
    NBBC,
    ProductInputDistribution,
    induced_symbol_distribution,
    make_ask,
    make_labeling,
)
from .errors import (
    BracketError,
    CompositionError,
    ConfigurationError,
    ConvergenceError,
    OutOfCodebookError,
    PdmShapeError,
    QuadratureError,
)
from .optimizer import (
    maximize_bmd_rate_mb,
    maximize_pdm_rate,
    mb_nu_for_entropy,
    mb_symbol_distribution,
    min_energy_product_dist,
    parallel_gap_summary,
    parallel_operating_point,
    uniform_parallel_se,
)
from .pas import parallel_code_rate, parallel_gamma
from .pdm import build_parallel_pdm, build_pdm, pdm_decode, pdm_encode
from .rates import DEFAULT_QUAD, QuadratureSpec, awgn_capacity, bmd_rate, required_snr
from .util import db_to_linear, linear_to_db

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_INTEGRITY = 4

_SCENARIO_SCHEMA_PATH = os.path.join(
    os.path.dirname(__file__), "schemas", "scenario.schema.json"
)
_PDM_SCHEMA_PATH = os.path.join(
    os.path.dirname(__file__), "schemas", "pdm_config.schema.json"
)


def _fmt(x):
    return f"{x:.9g}"


def _thread_count():
    raw = os.environ.get("PDMSHAPE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"PDMSHAPE_THREADS must be an integer, got {raw!r}")


def _write_lines(path, lines):
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_grid(spec):
    """SNR/power grids: 'start:stop:step' (inclusive) or comma list; '' is empty."""
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"grid must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigurationError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            return []
        return [start + i * step for i in range(count)]
    return [float(p) for p in spec.split(",") if p.strip()]


def _validate_json(instance, schema_path, what):
    import jsonschema

    with open(schema_path) as fh:
        schema = json.load(fh)
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"invalid {what}: {exc.message}")


def _quad(args):
    tol = getattr(args, "quad_tol", None)
    if tol is None:
        return DEFAULT_QUAD
    return QuadratureSpec(tol_bits=tol)


def _rate_scheme_fn(args, quad):
    """Build snr(linear) -> rate for the requested scheme, plus a params tag."""
    m = args.constellation
    scheme = args.scheme
    if scheme == "capacity":
        return awgn_capacity, "closed-form"
    c = make_ask(m)
    fec = make_labeling(BRGC, m)
    if scheme == "bmd-uniform":
        probs = np.full(c.size, 1.0 / c.size)
        e2 = float(probs @ c.points**2)

        def fn(snr):
            return bmd_rate(probs, fec, c.with_delta(math.sqrt(snr / e2)), quad=quad)

        return fn, f"m={m}"
    if scheme == "bmd-mb":
        if args.optimize:
            return (
                lambda snr: maximize_bmd_rate_mb(snr, m, quad=quad).rate,
                f"m={m};optimized",
            )
        if args.dm_rate is None:
            raise ConfigurationError("bmd-mb needs --dm-rate or --optimize")
        nu = mb_nu_for_entropy(c, args.dm_rate)
        probs = mb_symbol_distribution(c, nu)
        e2 = float(probs @ c.points**2)

        def fn(snr):
            return bmd_rate(probs, fec, c.with_delta(math.sqrt(snr / e2)), quad=quad)

        return fn, f"m={m};amp_entropy={_fmt(args.dm_rate)}"
    if scheme == "pdm":
        if args.optimize:
            warm = {"q": None}

            def fn(snr):
                r = maximize_pdm_rate(snr, m, quad=quad, q0=warm["q"])
                warm["q"] = r.level_probs
                return r.rate

            return fn, f"m={m};optimized"
        if args.dm_rate is None:
            raise ConfigurationError("pdm needs --dm-rate or --optimize")
        shaped = args.shaped_levels or (m - 1)
        opt = min_energy_product_dist(m, args.dm_rate, shaped_levels=shaped)
        dist = opt.product_distribution()
        dm = make_labeling(NBBC, m)
        probs = induced_symbol_distribution(dist, dm, c)
        e2 = float(probs @ c.points**2)
        entropy = dist.entropy

        def fn(snr):
            from .rates import conditional_bit_entropies

            cond = conditional_bit_entropies(
                probs, fec, c.with_delta(math.sqrt(snr / e2)), quad=quad
            )
            return max(0.0, entropy - float(cond.sum()))

        return fn, f"m={m};dm_rate={_fmt(args.dm_rate)};shaped={shaped}"
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def cmd_rates(args):
    quad = _quad(args)
    grid = _parse_grid(args.snr_grid)
    fn, params = _rate_scheme_fn(args, quad)
    lines = ["snr_db,rate_bpcu,scheme,params"]
    threads = _thread_count()
    snrs = [db_to_linear(db) for db in grid]
    if threads > 1 and not args.optimize:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(fn, snrs))
    else:
        vals = [fn(s) for s in snrs]
    for db, rate in zip(grid, vals):
        lines.append(f"{_fmt(db)},{_fmt(rate)},{args.scheme},{params}")
    _write_lines(args.out, lines)
    return EXIT_OK


def snr_table_rows(m=6, dm_rate=4.1, gamma=0.4, quad=DEFAULT_QUAD, tol_bits=1e-5):
    """Required SNRs for the reference DM and the shaped-level ladder."""
    target = dm_rate + gamma
    cap_db = required_snr(awgn_capacity, target, tol_bits=tol_bits)
    c = make_ask(m)
    fec = make_labeling(BRGC, m)
    dm = make_labeling(NBBC, m)
    rows = []

    def fixed_fn(probs, entropy):
        e2 = float(probs @ c.points**2)

        def fn(snr):
            from .rates import conditional_bit_entropies

            cond = conditional_bit_entropies(
                probs, fec, c.with_delta(math.sqrt(snr / e2)), quad=quad
            )
            return max(0.0, entropy - float(cond.sum()))

        return fn

    nu = mb_nu_for_entropy(c, dm_rate)
    probs = mb_symbol_distribution(c, nu)
    from .util import entropy_bits

    snr_db = required_snr(
        fixed_fn(probs, entropy_bits(probs)), target, tol_bits=tol_bits
    )
    rows.append((f"{c.size // 2}-ary-dm", snr_db, snr_db - cap_db))
    for shaped in range(1, m):
        opt = min_energy_product_dist(m, dm_rate, shaped_levels=shaped)
        dist = opt.product_distribution()
        p = induced_symbol_distribution(dist, dm, c)
        snr_db = required_snr(fixed_fn(p, dist.entropy), target, tol_bits=tol_bits)
        rows.append((f"pdm-{shaped}-shaped", snr_db, snr_db - cap_db))
    return rows, cap_db


def cmd_snr_table(args):
    quad = _quad(args)
    rows, _ = snr_table_rows(
        m=args.constellation, dm_rate=args.dm_rate, gamma=args.gamma, quad=quad
    )
    lines = ["configuration,required_snr_db,gap_to_capacity_db"]
    for name, snr_db, gap_db in rows:
        lines.append(f"{name},{_fmt(snr_db)},{_fmt(gap_db)}")
    _write_lines(args.out, lines)
    return EXIT_OK


def load_scenario(path, channels_per_group=None):
    with open(path) as fh:
        raw = json.load(fh)
    _validate_json(raw, _SCENARIO_SCHEMA_PATH, "scenario")
    scenario = dict(raw)
    if channels_per_group is not None:
        scenario["channels_per_group"] = channels_per_group
    scenario.setdefault("m_max", 8)
    scenario.setdefault("channels_per_group", 1)
    scenario.setdefault("seed", 1234)
    scenario.setdefault("quad_tol", DEFAULT_QUAD.tol_bits)
    return scenario


def _scenario_gamma(scenario):
    gains = np.asarray(scenario["gains"], dtype=float)
    if "gamma" in scenario:
        return float(scenario["gamma"])
    # resolve the code rate against the plan at the target-SE power
    target = scenario["target_se"]

    def wf_se(p):
        return waterfill(ParallelChannelSet(gains=gains, power=p)).sum_se

    from .optimizer import power_db_for_se

    power_db = power_db_for_se(wf_se, target, -10.0, 40.0, tol_bits=1e-9)
    alloc = waterfill(
        ParallelChannelSet(gains=gains, power=float(db_to_linear(power_db)))
    )
    plan = bit_load(alloc, scenario["m_max"])
    return parallel_gamma(plan, float(scenario["code_rate"]))


def cmd_parallel(args):
    scenario = load_scenario(args.scenario, args.channels_per_group)
    quad = QuadratureSpec(tol_bits=scenario["quad_tol"])
    gains = np.asarray(scenario["gains"], dtype=float)
    gamma = _scenario_gamma(scenario)
    m_max = scenario["m_max"]
    grid = scenario.get("power_grid_db", [])
    if isinstance(grid, dict):
        grid = _parse_grid(f"{grid['start']}:{grid['stop']}:{grid['step']}")
    threads = _thread_count()

    def point(db):
        p = float(db_to_linear(db))
        pt = parallel_operating_point(gains, p, gamma, m_max, quad)
        return (db, pt.waterfilling_se, pt.shaped_se, pt.uniform_se)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curve = list(pool.map(point, grid))
    else:
        curve = [point(db) for db in grid]
    curve_lines = ["power_db,waterfilling_se_bpcu,shaped_se_bpcu,uniform_se_bpcu"]
    for db, wf, sh, un in curve:
        curve_lines.append(f"{_fmt(db)},{_fmt(wf)},{_fmt(sh)},{_fmt(un)}")

    summary = parallel_gap_summary(
        gains,
        gamma,
        scenario["target_se"],
        m_max,
        quad,
        lo_db=min(grid, default=5.0),
        hi_db=max(grid, default=30.0),
    )
    target_power = float(db_to_linear(summary["waterfilling_power_db"]))
    alloc = waterfill(ParallelChannelSet(gains=gains, power=target_power))
    plan = bit_load(alloc, m_max).scaled(scenario["channels_per_group"])
    summary_lines = ["quantity,value"]
    for key in (
        "target_se",
        "waterfilling_power_db",
        "shaped_power_db",
        "uniform_power_db",
        "shaped_gap_db",
        "uniform_gap_db",
    ):
        summary_lines.append(f"{key},{_fmt(summary[key])}")
    summary_lines.append(f"gamma,{_fmt(gamma)}")
    summary_lines.append(f"code_rate,{_fmt(parallel_code_rate(plan, gamma))}")
    distinct = sorted(set(plan.channel_m.tolist()), reverse=True)
    summary_lines.append(
        "plan_constellations," + "/".join(str(2**m) for m in distinct)
    )
    summary_lines.append(
        "level_lengths," + " ".join(str(int(n)) for n in plan.level_lengths)
    )
    summary_lines.append(f"fec_frame_length,{plan.fec_frame_length}")
    _write_lines(args.curves_out, curve_lines)
    _write_lines(args.summary_out, summary_lines)
    return EXIT_OK


def load_pdm_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    _validate_json(raw, _PDM_SCHEMA_PATH, "matcher config")
    targets = raw.get("level_targets")
    lengths = raw.get("level_input_lengths")
    if "single" in raw:
        single = raw["single"]
        return build_pdm(
            single["m"],
            single["n"],
            level_targets=targets,
            level_input_lengths=lengths,
        )
    channel_m = []
    for group in raw["channels"]:
        channel_m.extend([group["m"]] * group.get("count", 1))
    from .allocation import make_plan

    return build_parallel_pdm(
        make_plan(channel_m), level_targets=targets, level_input_lengths=lengths
    )


def _read_payload(path, k):
    with open(path) as fh:
        text = "".join(fh.read().split())
    expected_chars = 2 * ((k + 7) // 8)
    if len(text) != expected_chars:
        raise ConfigurationError(
            f"payload must be {expected_chars} hex characters for k={k} bits, "
            f"got {len(text)}"
        )
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raise ConfigurationError("payload is not valid hex")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    return bits[:k]


def _write_payload(path, bits):
    pad = (-bits.size) % 8
    padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    _write_lines(path, [np.packbits(padded).tobytes().hex()])


def cmd_pdm(args):
    config = load_pdm_config(args.config)
    if args.action == "encode":
        bits = _read_payload(args.infile, config.total_input_bits)
        frame = pdm_encode(config, bits)
        lines = ["amplitude"] + [str(int(a)) for a in frame.amplitudes]
        _write_lines(args.out, lines)
        return EXIT_OK
    with open(args.infile) as fh:
        rows = [r.strip() for r in fh if r.strip()]
    if rows and rows[0] == "amplitude":
        rows = rows[1:]
    try:
        amps = np.array([int(r) for r in rows], dtype=np.int64)
    except ValueError:
        raise ConfigurationError("amplitude file must contain one integer per line")
    bits = pdm_decode(config, amps)
    _write_payload(args.out, bits)
    return EXIT_OK


def _selftest_suites():
    def matcher_bijectivity():
        from .ccdm import design_matcher, dm_decode, dm_encode
        from .util import int_to_bits

        checks = 0
        for n in range(1, 11):
            for n1 in range(n + 1):
                code = design_matcher(n, n1 / n)
                for r in range(1 << code.k):
                    d = int_to_bits(r, code.k)
                    assert np.array_equal(dm_decode(code, dm_encode(code, d)), d)
                    checks += 1
        return checks

    def entropy_identity():
        from .util import binary_entropy, entropy_bits

        rng = np.random.default_rng(5)
        checks = 0
        for _ in range(25):
            m = int(rng.integers(2, 7))
            p1 = rng.uniform(0, 1, m - 1)
            dist = ProductInputDistribution.from_p1(p1)
            for kind in (BRGC, NBBC):
                probs = induced_symbol_distribution(
                    dist, make_labeling(kind, m), make_ask(m)
                )
                want = 1 + sum(binary_entropy(p) for p in p1)
                assert abs(entropy_bits(probs) - want) < 1e-12
                checks += 1
        return checks

    def rate_identities():
        from .rates import bmd_metric, gmi_rate

        c = make_ask(2).with_delta(1.3)
        fec = make_labeling(BRGC, 2)
        dm = make_labeling(NBBC, 2)
        dist = ProductInputDistribution.from_p1([0.8])
        probs = induced_symbol_distribution(dist, dm, c)
        from .rates import conditional_bit_entropies

        cond = conditional_bit_entropies(probs, fec, c)
        direct = max(0.0, dist.entropy - float(cond.sum()))
        via_symbol = bmd_rate(probs, fec, c)
        assert abs(direct - via_symbol) < 1e-9
        g = gmi_rate(probs, bmd_metric(probs, fec, c), c)
        tol = 1e-9 if os.environ.get("PDMSHAPE_FAULT") != "rate-identities" else 1e-18
        assert abs(g - via_symbol) < tol
        return 2

    def gamma_roundtrip():
        from .allocation import make_plan
        from .pas import (
            code_rate_from_gamma,
            gamma_from_code_rate,
        )

        rng = np.random.default_rng(6)
        checks = 0
        for _ in range(50):
            m = int(rng.integers(2, 9))
            g = float(rng.uniform(0, 1))
            assert abs(gamma_from_code_rate(code_rate_from_gamma(g, m), m) - g) < 1e-12
            plan = make_plan(rng.integers(2, 7, size=rng.integers(1, 6)))
            assert (
                abs(parallel_gamma(plan, parallel_code_rate(plan, g)) - g) < 1e-12
            )
            checks += 2
        return checks

    def waterfill_kkt():
        rng = np.random.default_rng(7)
        checks = 0
        for _ in range(25):
            gains = rng.uniform(0.2, 3.0, rng.integers(1, 8))
            power = float(rng.uniform(0.5, 100.0))
            alloc = waterfill(ParallelChannelSet(gains=gains, power=power))
            assert abs(alloc.average_power - power) < 1e-9 * max(1.0, power)
            active = alloc.powers > 0
            resid = alloc.powers[active] - (1 / alloc.lam - 1 / gains[active] ** 2)
            assert np.all(np.abs(resid) < 1e-9)
            assert np.all(1 / gains[~active] ** 2 >= 1 / alloc.lam - 1e-12)
            checks += 3
        return checks

    def mc_vs_quadrature():
        from .montecarlo import RandomStream, estimate_bmd_terms
        from .rates import conditional_bit_entropies

        c = make_ask(3).with_delta(1.1)
        lab = make_labeling(BRGC, 3)
        probs = np.full(8, 1 / 8)
        est = estimate_bmd_terms(probs, lab, c, 40000, RandomStream(11))
        quad = conditional_bit_entropies(probs, lab, c)
        tol_scale = 1.0 if os.environ.get("PDMSHAPE_FAULT") != "mc-vs-quadrature" else 0.0
        for e, qv in zip(est, quad):
            assert abs(e.value - qv) <= tol_scale * max(4 * e.std_error, 0.005)
        return len(est)

    def quadrature_tolerance():
        tol = 1e-7
        if os.environ.get("PDMSHAPE_FAULT") == "quadrature":
            quad = QuadratureSpec(tol_bits=1e-16, max_doublings=2)
        else:
            quad = QuadratureSpec(tol_bits=tol)
        c = make_ask(2).with_delta(1.0)
        probs = np.full(4, 0.25)
        a = bmd_rate(probs, make_labeling(BRGC, 2), c, quad=quad)
        b = bmd_rate(
            probs, make_labeling(BRGC, 2), c, quad=QuadratureSpec(tol_bits=tol / 100)
        )
        assert abs(a - b) < 1e-5
        return 1

    return [
        ("matcher-bijectivity", matcher_bijectivity),
        ("entropy-identity", entropy_identity),
        ("rate-identities", rate_identities),
        ("gamma-roundtrip", gamma_roundtrip),
        ("waterfill-kkt", waterfill_kkt),
        ("mc-vs-quadrature", mc_vs_quadrature),
        ("quadrature-tolerance", quadrature_tolerance),
    ]


def cmd_selftest(args):
    failed = 0
    for name, suite in _selftest_suites():
        try:
            checks = suite()
            print(f"{name}: PASS ({checks} checks)")
        except (AssertionError, PdmShapeError) as exc:
            failed += 1
            print(f"{name}: FAIL ({exc})")
    print(f"selftest: {'FAIL' if failed else 'PASS'}")
    return EXIT_SELFTEST if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pdmshape",
        description="Probabilistic amplitude shaping with product distribution matching",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="achievable-rate curves over an SNR grid")
    p.add_argument("--constellation", type=int, default=6, metavar="M",
                   help="bits per symbol (2^M-ASK)")
    p.add_argument("--scheme", required=True,
                   choices=["capacity", "bmd-uniform", "bmd-mb", "pdm"])
    p.add_argument("--snr-grid", required=True,
                   help="dB grid: 'start:stop:step' or comma list; empty for none")
    p.add_argument("--dm-rate", type=float, default=None,
                   help="amplitude entropy of the fixed shaped distribution")
    p.add_argument("--shaped-levels", type=int, default=None)
    p.add_argument("--optimize", action="store_true",
                   help="re-optimize the distribution at every SNR")
    p.add_argument("--quad-tol", type=float, default=None)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(fn=cmd_rates)

    p = sub.add_parser(
        "snr-table",
        help="required SNRs for the reference DM and shaped-level ladder",
    )
    p.add_argument("--constellation", type=int, default=6)
    p.add_argument("--dm-rate", type=float, default=4.1)
    p.add_argument("--gamma", type=float, default=0.4)
    p.add_argument("--quad-tol", type=float, default=None)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(fn=cmd_snr_table)

    p = sub.add_parser(
        "parallel", help="waterfilling/shaped/uniform curves for parallel channels"
    )
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--channels-per-group", type=int, default=None,
                   help="override the scenario's channel multiplicity")
    p.add_argument("--curves-out", default=None)
    p.add_argument("--summary-out", default=None)
    p.set_defaults(fn=cmd_parallel)

    p = sub.add_parser("pdm", help="matcher frame encode/decode")
    p.add_argument("action", choices=["encode", "decode"])
    p.add_argument("--config", required=True, help="matcher config JSON")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_pdm)

    p = sub.add_parser("selftest", help="run reduced invariant suites")
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CompositionError, OutOfCodebookError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (QuadratureError, BracketError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
