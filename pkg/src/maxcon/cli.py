"""Command-line front end: ``maxcon {test,power,simulate,bench}``.

Exit codes: 0 success, 2 input error, 3 numerical budget exhausted for at
least one SNP (the report is still written).  ``MAXCON_THREADS`` sets the
worker count (0 or unset: one per CPU).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import numpy as np

from . import __version__
from .core import (
    PATTERN_NAMES,
    ContrastMatrix,
    GroupedDataset,
    default_pg_contrasts,
    log_transform,
    validate_contrasts,
)
from .errors import (
    BudgetExhausted,
    DuplicateObservation,
    MalformedRow,
    MaxconError,
    UnknownGenotype,
)
from .mvdist import QmcConfig
from .power import (
    POWER_QMC,
    critical_values,
    noncentrality,
    power_S,
    power_T,
    priority_index,
    r_tp,
)
from .simulate import (
    BENCH_SCENARIOS,
    SIM_METHODS,
    BenchScenario,
    ScenarioConfig,
    bench_timing,
    hwe_group_sizes,
    pattern_means,
    run_scenario,
)
from .stattests import (
    PermutationConfig,
    kruskal_wallis_test,
    max_contrast_test,
    modified_max_contrast_test,
    permuted_modified_max_contrast_test,
)

EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3
GENOTYPES = ("0", "1", "2")
MISSING = ("", "NA")
LONG_HEADER = ("snp_id", "subject_id", "genotype", "value")

REPORT_COLUMNS = ("snp_id", "method", "statistic", "p_value", "p_error", "selected",
                  "n_0", "n_1", "n_2", "flags")
METHOD_ORDER = ("MCM", "MMCM", "pMMCM", "KW")
_METHOD_FLAGS = {"mcm": ("MCM",), "mmcm": ("MMCM",), "pmmcm": ("pMMCM",), "kw": ("KW",),
                 "all": METHOD_ORDER}

SIM_COLUMNS = ("table", "maf", "n", "n_0", "n_1", "n_2", "pattern", "delta", "method", "tail",
               "alpha", "reps", "n_p", "r_p", "n_tp", "r_tp", "fp",
               "sel_additive", "sel_dominant", "sel_recessive", "seconds",
               "ref_r_p", "ref_r_tp", "ref_fp")
BENCH_COLUMNS = ("scenario", "pattern", "delta", "maf", "n", "method", "reps", "seconds",
                 "rejections", "ref_seconds")

BENCH_DISCLAIMER = ("note: seconds are wall-clock on this machine; only the ratios between rows "
                    "are comparable with other hardware")


# --------------------------------------------------------------------------- input


def _open_text(path):
    # newline="" lets csv handle LF and CRLF alike
    return open(path, encoding="utf-8", newline="")


def _parse_value(token, line):
    try:
        value = float(token)
    except ValueError:
        raise MalformedRow(line, f"value {token!r} is not a number") from None
    if not math.isfinite(value):
        raise MalformedRow(line, f"value {token!r} is not finite")
    return value


def _assemble(collected, scale):
    return {snp: GroupedDataset(tuple(np.array(g, dtype=float) for g in groups), scale)
            for snp, groups in collected.items()}


def parse_input(path, fmt: str = "long-csv", scale: str = "raw") -> dict:
    """Read genotype/value data into one dataset per SNP (input order kept).

    ``long-csv``: header ``snp_id,subject_id,genotype,value``, one row per
    observation.  ``wide-csv``: header ``subject_id,value,geno_<snp>...``, one
    row per subject; an empty or ``NA`` genotype cell leaves the subject out of
    that SNP.  Genotype codes 0, 1, 2 give groups in that order.
    """
    if fmt not in ("long-csv", "wide-csv"):
        raise ValueError(f"unknown input format {fmt!r}")
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "missing header") from None
        if header and header[0].startswith("﻿"):
            header[0] = header[0][1:]
        header = [h.strip() for h in header]
        if fmt == "long-csv":
            return _assemble(_read_long(reader, header), scale)
        return _assemble(_read_wide(reader, header), scale)


def _read_long(reader, header):
    if tuple(header) != LONG_HEADER:
        raise MalformedRow(1, f"header must be {','.join(LONG_HEADER)}")
    collected, seen = {}, set()
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise MalformedRow(line, f"expected 4 fields, got {len(row)}")
        snp, subject, geno, token = (x.strip() for x in row)
        if not snp or not subject:
            raise MalformedRow(line, "empty snp_id or subject_id")
        if geno not in GENOTYPES:
            raise UnknownGenotype(line, geno)
        value = _parse_value(token, line)
        if (snp, subject) in seen:
            raise DuplicateObservation(snp, subject)
        seen.add((snp, subject))
        collected.setdefault(snp, ([], [], []))[int(geno)].append(value)
    return collected


def _read_wide(reader, header):
    if len(header) < 3 or header[0] != "subject_id" or header[1] != "value":
        raise MalformedRow(1, "header must be subject_id,value,geno_<snp>,...")
    snps = []
    for h in header[2:]:
        if not h.startswith("geno_") or len(h) == 5:
            raise MalformedRow(1, f"column {h!r} is not geno_<snp>")
        snps.append(h[5:])
    if len(set(snps)) != len(snps):
        raise MalformedRow(1, "repeated SNP column")
    collected = {snp: ([], [], []) for snp in snps}
    subjects = set()
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
        subject = row[0].strip()
        if not subject:
            raise MalformedRow(line, "empty subject_id")
        if subject in subjects:
            raise DuplicateObservation(snps[0], subject)
        subjects.add(subject)
        value = _parse_value(row[1].strip(), line)
        for snp, geno in zip(snps, row[2:]):
            geno = geno.strip()
            if geno in MISSING:
                continue
            if geno not in GENOTYPES:
                raise UnknownGenotype(line, geno)
            collected[snp][int(geno)].append(value)
    return collected


def write_long_csv(datasets: dict, fh) -> None:
    """Inverse of the long-csv reader (subjects are numbered per SNP)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(LONG_HEADER)
    for snp, ds in datasets.items():
        k = 0
        for geno, group in enumerate(ds.groups):
            for v in group:
                w.writerow((snp, f"{snp}_s{k}", geno, repr(float(v))))
                k += 1


def write_wide_csv(datasets: dict, fh) -> None:
    """Inverse of the wide-csv reader.  Each observation becomes its own
    subject, typed for one SNP and ``NA`` for the others."""
    snps = list(datasets)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("subject_id", "value", *(f"geno_{s}" for s in snps)))
    for j, snp in enumerate(snps):
        k = 0
        for geno, group in enumerate(datasets[snp].groups):
            for v in group:
                cells = ["NA"] * len(snps)
                cells[j] = str(geno)
                w.writerow((f"{snp}_s{k}", repr(float(v)), *cells))
                k += 1


def read_contrasts(source: str) -> ContrastMatrix:
    """``"default"`` or a CSV file of ``name,c_1,...,c_a`` rows (``#`` comments)."""
    if source == "default":
        return default_pg_contrasts()
    names, rows = [], []
    with _open_text(source) as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#") or not "".join(row).strip():
                continue
            if len(row) < 3:
                raise MalformedRow(line_no, "contrast rows are name,c_1,...,c_a")
            names.append(row[0].strip())
            rows.append([_parse_value(x.strip(), line_no) for x in row[1:]])
    if not rows or len({len(r) for r in rows}) != 1:
        raise MalformedRow(0, "contrast file must hold rows of equal length")
    return validate_contrasts(ContrastMatrix(np.array(rows), tuple(names)), 3)


# --------------------------------------------------------------------------- output helpers


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "NA" if not math.isfinite(x) else f"{float(x):.10g}"
    return str(x)


def _write_table(rows, columns, fh, delimiter=","):
    w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])


def _json_value(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def worker_count(explicit=None) -> int:
    raw = explicit if explicit is not None else os.environ.get("MAXCON_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise MaxconError(f"MAXCON_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise MaxconError("MAXCON_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


# --------------------------------------------------------------------------- test


def snp_seed(seed: int, snp_id: str) -> int:
    return (int(seed) ^ zlib.crc32(snp_id.encode("utf-8"))) & 0xFFFFFFFF


def screen_snp(snp_id, ds, methods, C, qmc, pcfg, alpha, tail, log):
    """All requested tests for one SNP; failures become flags on the rows."""
    base_flags = []
    rows = []
    sizes = [int(g.size) for g in ds.groups]
    nonempty = [g for g in ds.groups if g.size]
    if len(nonempty) < len(ds.groups):
        base_flags.append("degenerate")
    try:
        work = log_transform(ds) if log else GroupedDataset(ds.groups, "log")
    except MaxconError as exc:
        work, base_flags = None, base_flags + [f"input_error:{type(exc).__name__}"]
    seed = snp_seed(pcfg.seed, snp_id)
    for method in methods:
        row = {"snp_id": snp_id, "method": method, "n_0": sizes[0], "n_1": sizes[1],
               "n_2": sizes[2], "p_value": None}
        flags = list(base_flags)
        res = None
        try:
            if work is None:
                pass
            elif method == "KW":
                if len(nonempty) >= 2:
                    sub = GroupedDataset(tuple(g for g in work.groups if g.size), "log")
                    res = kruskal_wallis_test(sub)
            elif "degenerate" not in flags:
                if method == "MCM":
                    res = max_contrast_test(work, C, qmc.replace(seed=seed), tail)
                elif method == "MMCM":
                    res = modified_max_contrast_test(work, C, qmc.replace(seed=seed), tail)
                else:
                    res = permuted_modified_max_contrast_test(
                        work, C, PermutationConfig(pcfg.n_resamp_min, pcfg.n_resamp_max, pcfg.eps,
                                                   pcfg.confidence_mult, seed, pcfg.add_one), tail)
        except MaxconError as exc:
            flags.append(f"error:{type(exc).__name__}")
            res = None
        if res is not None:
            row.update(statistic=res.statistic.max_value, p_value=res.p_value, p_error=res.p_error,
                       selected=res.pattern)
            if res.budget_exhausted:
                flags.append("budget_exhausted")
            if method == "pMMCM" and not res.aux.get("converged", True):
                flags.append("resample_cap")
            if res.p_value <= alpha:
                flags.append("significant")
        row["flags"] = ";".join(flags)
        rows.append(row)
    return rows


def _sort_report(rows):
    def key(row):
        p = row["p_value"]
        return (METHOD_ORDER.index(row["method"]), p is None, p if p is not None else 0.0)
    return sorted(rows, key=key)  # stable: input order breaks ties


def render_report(rows, fmt: str) -> str:
    if fmt == "json":
        payload = [{c: _json_value(r.get(c)) for c in REPORT_COLUMNS} for r in rows]
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    _write_table(rows, REPORT_COLUMNS, buf, delimiter="\t")
    return buf.getvalue()


def cmd_test(args) -> int:
    datasets = parse_input(args.input, args.input_format)
    C = read_contrasts(args.contrasts)
    qmc = QmcConfig(abs_error_tol=args.eps, max_points=args.max_points, seed=args.seed)
    pcfg = PermutationConfig(n_resamp_min=args.nresamp_min, n_resamp_max=args.nresamp_max,
                             eps=args.eps, seed=args.seed)
    methods = _METHOD_FLAGS[args.method]
    log = args.log_transform == "on"

    def job(item):
        return screen_snp(item[0], item[1], methods, C, qmc, pcfg, args.alpha, args.tail, log)

    items = list(datasets.items())
    workers = worker_count(args.threads)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_snp = list(pool.map(job, items))
    else:
        per_snp = [job(it) for it in items]
    rows = _sort_report([r for rs in per_snp for r in rs])
    _emit(render_report(rows, args.format), args.out)
    exhausted = any("budget_exhausted" in r["flags"].split(";") for r in rows)
    return EXIT_BUDGET if exhausted else EXIT_OK


# --------------------------------------------------------------------------- power


def power_columns(C: ContrastMatrix) -> tuple:
    names = C.names
    return (("maf", "n", "n_0", "n_1", "n_2", "pattern", "delta", "alpha", "tail", "u_alpha", "v_alpha")
            + tuple(f"kinv_v_{k}" for k in names) + ("priority",)
            + tuple(f"lambda_T_{k}" for k in names) + tuple(f"lambda_S_{k}" for k in names)
            + ("beta_T", "beta_T_err", "beta_S", "beta_S_err", "r_tp_T", "r_tp_T_se", "r_tp_S", "r_tp_S_se"))


def power_rows(mafs, ns, deltas, patterns, alpha=0.05, sigma2=1.0, tail="one", C=None,
               mc_count=1_000_000, seed=0, competitors=None, cfg=None):
    """One row per (maf, n, delta, pattern); critical values are shared per (maf, n)."""
    C = C or default_pg_contrasts()
    cfg = cfg or POWER_QMC
    rows = []
    for maf in mafs:
        for n in ns:
            sizes = np.array(hwe_group_sizes(maf, n))
            D = 1.0 / sizes
            gamma = int(sizes.sum()) - sizes.size
            crit = critical_values(alpha, C, D, gamma, cfg, tail)
            base = {"maf": maf, "n": n, "n_0": sizes[0], "n_1": sizes[1], "n_2": sizes[2],
                    "alpha": alpha, "tail": tail, "u_alpha": crit.u_alpha, "v_alpha": crit.v_alpha,
                    "priority": C.names[priority_index(C, D)]}
            for k, name in enumerate(C.names):
                base[f"kinv_v_{name}"] = crit.thresholds_S[k]
            for delta in deltas:
                for pattern in patterns:
                    mu = pattern_means(pattern, 0.0 if pattern == "null" else delta)
                    row = dict(base, pattern=pattern, delta=0.0 if pattern == "null" else delta)
                    lt = noncentrality("T", mu, sigma2, C, D)
                    ls = noncentrality("S", mu, sigma2, C, D)
                    for k, name in enumerate(C.names):
                        row[f"lambda_T_{name}"] = lt[k]
                        row[f"lambda_S_{name}"] = ls[k]
                    bt = power_T(mu, sigma2, C, D, gamma, alpha, cfg, tail, crit)
                    bs = power_S(mu, sigma2, C, D, gamma, alpha, cfg, tail, crit)
                    row.update(beta_T=bt.beta, beta_T_err=bt.est_error,
                               beta_S=bs.beta, beta_S_err=bs.est_error)
                    k_true = C.names.index(pattern) if pattern in C.names else None
                    if k_true is not None and mc_count > 0 and row["delta"] > 0:
                        for method in ("T", "S"):
                            res = r_tp(method, k_true, row["delta"], sigma2, C, D, gamma, alpha,
                                       mc_count, seed, cfg, tail, crit, competitors=competitors)
                            row[f"r_tp_{method}"] = res.estimate
                            row[f"r_tp_{method}_se"] = res.se
                    rows.append(row)
    return rows


def cmd_power(args) -> int:
    C = read_contrasts(args.contrasts)
    competitors = None
    if args.rtp_competitors != "all":
        competitors = [int(x) for x in args.rtp_competitors.split(",") if x.strip()]
        if any(not 0 <= k < C.m for k in competitors):
            raise MaxconError("--rtp-competitors indices must be 0-based contrast rows")
    rows = power_rows(args.maf, args.n, args.delta, args.pattern, args.alpha, args.sigma2,
                      args.tail, C, args.mc_count, args.seed, competitors)
    buf = io.StringIO()
    _write_table(rows, power_columns(C), buf)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------- simulate / bench


def load_manifest(path=None) -> dict:
    """Parse a scenario manifest (the bundled ``reference-tables.toml`` by default)."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    if path in (None, "bundled"):
        text = resources.files("maxcon").joinpath("data/reference-tables.toml").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return tomllib.loads(text)


def manifest_scenarios(manifest: dict, tables=None):
    """Group manifest cells into scenarios: ``[(key, [cells...]), ...]`` in file order."""
    groups = {}
    for cell in manifest.get("cell", []):
        if tables and cell["table"] not in tables:
            continue
        key = (cell["table"], float(cell["maf"]), int(cell["n"]), cell["pattern"], float(cell["delta"]))
        groups.setdefault(key, []).append(cell)
    return list(groups.items())


def simulation_rows(metrics, table="", refs=None):
    cfg = metrics.config
    sizes = cfg.group_sizes
    refs = refs or {}
    rows = []
    for name, mm in metrics.methods.items():
        row = {"table": table, "maf": cfg.maf, "n": cfg.n_total, "n_0": sizes[0], "n_1": sizes[1],
               "n_2": sizes[2], "pattern": cfg.pattern, "delta": cfg.delta, "method": name,
               "tail": cfg.tail, "alpha": cfg.alpha, "reps": mm.n, "n_p": mm.n_p, "r_p": mm.r_p,
               "n_tp": mm.n_tp, "r_tp": mm.r_tp, "fp": metrics.fp(name), "seconds": mm.seconds}
        sel = mm.pattern_selections()
        if sel is not None and mm.n:
            for k, pname in enumerate(cfg.contrast_matrix.names):
                if pname in PATTERN_NAMES:
                    row[f"sel_{pname}"] = sel[k] / mm.n
        ref = refs.get(name, {})
        row.update(ref_r_p=ref.get("r_p"), ref_r_tp=ref.get("r_tp"), ref_fp=ref.get("fp"))
        rows.append(row)
    return rows


FIGURES = {
    "type1": lambda r: r["pattern"] == "null",
    "power": lambda r: r["pattern"] in PATTERN_NAMES and r["n"] == 300 and r["delta"] == 0.5,
    "ppv": lambda r: (r["pattern"] in PATTERN_NAMES and r["n"] == 300 and r["delta"] == 0.5
                      and r["r_tp"] is not None),
    "fp": lambda r: r["pattern"] == "valley" and r["n"] == 300 and r["delta"] == 0.5,
}
FIGURE_COLUMNS = ("figure", "panel", "maf", "method", "value")


def figure_rows(sim_rows):
    """Plot-ready long tables: rate against MAF per method, one panel per pattern or n."""
    out = []
    for fig, keep in FIGURES.items():
        for r in sim_rows:
            if not keep(r):
                continue
            panel = f"n={r['n']}" if fig == "type1" else r["pattern"]
            value = {"type1": r["r_p"], "power": r["r_p"], "ppv": r["r_tp"], "fp": r["fp"]}[fig]
            out.append({"figure": fig, "panel": panel, "maf": r["maf"], "method": r["method"],
                        "value": value})
    return out


def cmd_simulate(args) -> int:
    workers = worker_count(args.threads)
    methods = tuple(args.methods)
    common = dict(reps=args.reps, alpha=args.alpha, seed=args.seed, tail=args.tail,
                  engine=args.engine, workers=workers)
    rows = []
    if args.manifest:
        tables = set(args.tables.split(",")) if args.tables else None
        for (table, maf, n, pattern, delta), cells in manifest_scenarios(load_manifest(args.manifest), tables):
            cell_methods = tuple(m for m in SIM_METHODS if any(c["method"] == m for c in cells))
            cfg = ScenarioConfig(maf=maf, n_total=n, pattern=pattern, delta=delta, methods=cell_methods,
                                 **common)
            refs = {c["method"]: c for c in cells}
            rows += simulation_rows(run_scenario(cfg), table, refs)
    else:
        for maf in args.maf:
            for n in args.n:
                for pattern in args.pattern:
                    deltas = [0.0] if pattern == "null" else args.delta
                    for delta in deltas:
                        cfg = ScenarioConfig(maf=maf, n_total=n, pattern=pattern, delta=delta,
                                             methods=methods, **common)
                        rows += simulation_rows(run_scenario(cfg))
    if args.reps == 0:
        rows = []
    buf = io.StringIO()
    _write_table(rows, SIM_COLUMNS, buf)
    _emit(buf.getvalue(), args.out)
    if args.figure_data:
        os.makedirs(args.figure_data, exist_ok=True)
        fig = figure_rows(rows)
        for name in FIGURES:
            with open(os.path.join(args.figure_data, f"figure_{name}.csv"), "w",
                      encoding="utf-8", newline="") as fh:
                _write_table([r for r in fig if r["figure"] == name], FIGURE_COLUMNS, fh)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.manifest:
        entries = load_manifest(args.manifest).get("bench", [])
        scenarios = [BenchScenario(e["name"], e["pattern"], float(e["delta"]), float(e["maf"]),
                                   int(e.get("n", 300))) for e in entries]
        refs = {(e["name"], "pMMCM"): e.get("seconds_pmmcm") for e in entries}
        refs.update({(e["name"], "MMCM"): e.get("seconds_mmcm") for e in entries})
    else:
        scenarios, refs = list(BENCH_SCENARIOS), {}
    by_name = {s.name: s for s in scenarios}
    print(BENCH_DISCLAIMER, file=sys.stderr)
    t0 = time.perf_counter()
    result = bench_timing(scenarios, args.reps, args.eps, args.seed, args.alpha, args.tail)
    rows = []
    for b in result:
        sc = by_name[b.scenario]
        rows.append({"scenario": b.scenario, "pattern": sc.pattern, "delta": sc.delta, "maf": sc.maf,
                     "n": sc.n_total, "method": b.method, "reps": b.reps, "seconds": b.seconds,
                     "rejections": b.rejections, "ref_seconds": refs.get((b.scenario, b.method))})
    buf = io.StringIO()
    _write_table(rows, BENCH_COLUMNS, buf)
    _emit(buf.getvalue(), args.out)
    print(f"total {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _names(allowed):
    def parse(text):
        items = [x.strip() for x in text.split(",") if x.strip()]
        bad = [x for x in items if x not in allowed]
        if bad:
            raise argparse.ArgumentTypeError(f"unknown value(s) {bad}; choose from {allowed}")
        return items
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxcon", description="Maximum contrast tests for genotype groups.")
    p.add_argument("--version", action="version", version=f"maxcon {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="screen SNPs in a data file")
    t.add_argument("input")
    t.add_argument("--input-format", choices=("long-csv", "wide-csv"), default="long-csv")
    t.add_argument("--method", choices=tuple(_METHOD_FLAGS), default="all")
    t.add_argument("--contrasts", default="default", help="'default' or a CSV of name,c1,c2,c3 rows")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--tail", choices=("one", "two"), default="two")
    t.add_argument("--eps", type=float, default=1e-3, help="absolute error tolerance of the p-values")
    t.add_argument("--max-points", type=int, default=2 ** 24)
    t.add_argument("--nresamp-min", type=int, default=1000)
    t.add_argument("--nresamp-max", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log-transform", choices=("on", "off"), default="on")
    t.add_argument("--out", default="-")
    t.add_argument("--format", choices=("tsv", "json"), default="tsv")
    t.add_argument("--threads", type=int, default=None, help="overrides MAXCON_THREADS")
    t.set_defaults(func=cmd_test)

    w = sub.add_parser("power", help="critical values, power and true-pattern rates on a grid")
    w.add_argument("--maf", type=_floats, default=[0.25])
    w.add_argument("--n", type=_ints, default=[100])
    w.add_argument("--delta", type=_floats, default=[0.5])
    w.add_argument("--pattern", type=_names(("null", "valley") + PATTERN_NAMES), default=["dominant"])
    w.add_argument("--alpha", type=float, default=0.05)
    w.add_argument("--sigma2", type=float, default=1.0)
    w.add_argument("--tail", choices=("one", "two"), default="one")
    w.add_argument("--contrasts", default="default")
    w.add_argument("--mc-count", type=int, default=1_000_000, help="draws for R_TP (0 skips it)")
    w.add_argument("--rtp-competitors", default="all",
                   help="'all' (true pattern is the argmax) or 0-based rows it must beat")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", default="-")
    w.set_defaults(func=cmd_power)

    s = sub.add_parser("simulate", help="rejection and true-pattern rates of simulated scenarios")
    s.add_argument("--manifest", nargs="?", const="bundled", default=None,
                   help="scenario manifest; without a path the bundled table manifest")
    s.add_argument("--tables", default=None, help="comma list of manifest tables, e.g. S1,S3")
    s.add_argument("--maf", type=_floats, default=[0.12, 0.25, 0.33, 0.5])
    s.add_argument("--n", type=_ints, default=[100, 300])
    s.add_argument("--pattern", type=_names(("null", "valley") + PATTERN_NAMES), default=["null"])
    s.add_argument("--delta", type=_floats, default=[0.25, 0.5, 1.0])
    s.add_argument("--methods", type=_names(SIM_METHODS), default=["MCM", "MMCM", "KW"])
    s.add_argument("--reps", type=int, default=2000)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--tail", choices=("one", "two"), default="two")
    s.add_argument("--engine", choices=("fast", "full"), default="fast")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--figure-data", default=None, help="directory for per-figure CSVs")
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="time MMCM against pMMCM")
    b.add_argument("--manifest", nargs="?", const="bundled", default=None)
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--eps", type=float, default=1e-2)
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--tail", choices=("one", "two"), default="two")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (MaxconError, OSError, ValueError) as exc:
        if isinstance(exc, BudgetExhausted):
            print(f"maxcon: {exc}", file=sys.stderr)
            return EXIT_BUDGET
        print(f"maxcon: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
