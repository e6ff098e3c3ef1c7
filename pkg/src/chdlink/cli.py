"""Experiment orchestration: config files, sweeps, seeding and CSV output.

Config files are flat ``key = value`` text (``#`` starts a comment).  The
keys ``p, rho, L, U, V, K, N, Ms`` accept comma-separated lists and are
swept as a cartesian product; ``snr_db`` is the SNR grid of every run and
``seeds`` lists replication seeds.  One CSV row is emitted per
(sweep combination x SNR point x replication seed).

Seeding is reproducible row by row: the cell seed is
``SeedSequence([master_seed, sweep_index, replication_seed])`` reduced to
one 32-bit word, and the engine derives the per-SNR stream from
``SeedSequence([cell_seed, snr_index])``.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .buffers import BufferContractError
from .channel import ChannelParams, CsiErrorParams
from .engine import ConfigError, RunStats, SimConfig, run_cell

# keys that may hold a list of values and become sweep axes
SWEEPABLE = ("p", "rho", "L", "U", "V", "K", "N", "Ms")

_SCALAR_KEYS = {
    "label": str,
    "J": int,
    "T": int,
    "packets": int,
    "seed": int,
    "calibration": int,
    "gamma": float,
    "xi": float,
    "distance": float,
    "sigma2": float,
    "n0": float,
    "beta": float,
    "alpha": float,
}

_DEFAULTS = {
    "label": "chd-best-link",
    "K": [5], "N": [10], "Ms": [2], "U": [2], "V": [2],
    "J": 6, "L": [0], "p": [0.0], "rho": [0.0],
    "T": 100, "packets": 10000, "seed": 12345, "calibration": 100,
    "gamma": 1.0, "xi": 1.0, "distance": 1.0, "sigma2": 1.0, "n0": 1.0,
    "beta": 0.0, "alpha": 0.0,
    "snr_db": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
    "seeds": [1],
}

CSV_FIELDS = (
    "label", "K", "N", "Ms", "U", "V", "J", "L", "p", "rho", "beta",
    "alpha", "snr_db", "ber", "ber_se", "avg_delay_slots", "delay_se",
    "mmd_rate_ul", "mmd_rate_dl", "pep_theory_mean", "pep_se", "slots_ma",
    "slots_bc", "packets_delivered", "seed",
)


@dataclass
class ExperimentSpec:
    """A validated experiment: base values plus the sweep axes."""

    label: str
    values: dict          # every config key -> scalar or list
    sweeps: dict          # sweepable key -> list of values (len >= 1)
    snr_db: list
    seeds: list

    def combinations(self) -> list:
        """Cartesian product of the sweep axes, in SWEEPABLE key order."""
        combos = [{}]
        for key in SWEEPABLE:
            combos = [dict(c, **{key: v}) for c in combos for v in self.sweeps[key]]
        return combos

    def config_for(self, combo: dict, cell_seed: int) -> SimConfig:
        vals = self.values
        channel = ChannelParams(
            gamma=vals["gamma"], xi=vals["xi"], rho=float(combo["rho"]),
            sigma2=vals["sigma2"], uplink_distance=vals["distance"],
            downlink_distance=vals["distance"])
        csi = CsiErrorParams(beta=vals["beta"], alpha=vals["alpha"],
                             enabled=vals["beta"] > 0)
        return SimConfig(
            K=int(combo["K"]), N=int(combo["N"]), Ms=int(combo["Ms"]),
            U=int(combo["U"]), V=int(combo["V"]), J=vals["J"],
            L=int(combo["L"]), p=float(combo["p"]),
            snr_db=tuple(self.snr_db), packets=vals["packets"],
            T=vals["T"], n0=vals["n0"], channel=channel, csi=csi,
            seed=cell_seed, calibration_draws=vals["calibration"])


def _parse_scalar(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def load_config(path: str) -> ExperimentSpec:
    """Parse and validate an experiment file; defaults fill missing keys."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    values = {k: (list(v) if isinstance(v, list) else v)
              for k, v in _DEFAULTS.items()}
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in text.split("=", 1))
        parts = [p for p in raw.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"{path}:{lineno}: empty value for '{key}'")
        if key in SWEEPABLE or key in ("snr_db", "seeds"):
            values[key] = [_parse_scalar(p) for p in parts]
        elif key in _SCALAR_KEYS:
            if len(parts) > 1:
                raise ConfigError(f"{path}:{lineno}: '{key}' does not sweep")
            parsed = _parse_scalar(parts[0])
            want = _SCALAR_KEYS[key]
            if want is not str and isinstance(parsed, str):
                raise ConfigError(f"{path}:{lineno}: '{key}' must be numeric")
            values[key] = want(parsed)
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")

    spec = ExperimentSpec(
        label=str(values["label"]),
        values=values,
        sweeps={k: values[k] for k in SWEEPABLE},
        snr_db=[float(s) for s in values["snr_db"]],
        seeds=[int(s) for s in values["seeds"]],
    )
    problems = []
    if any(s < 0 for s in spec.seeds):
        problems.append("replication seeds must be nonnegative")
    for combo in spec.combinations():
        try:
            spec.config_for(combo, cell_seed=0).validate()
        except (ConfigError, ValueError) as exc:
            problems.append(f"{combo}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))
    return spec


def derive_cell_seed(master_seed: int, sweep_index: int, rep_seed: int) -> int:
    """Pure row-seed derivation, so single rows can be re-run in isolation."""
    seq = np.random.SeedSequence([int(master_seed), int(sweep_index), int(rep_seed)])
    return int(seq.generate_state(1, np.uint32)[0])


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)     # shortest round-trip representation
    return str(value)


def _row(spec: ExperimentSpec, combo: dict, rep_seed: int, stats: RunStats) -> dict:
    vals = spec.values
    delay = stats.avg_delay
    return {
        "label": spec.label,
        "K": combo["K"], "N": combo["N"], "Ms": combo["Ms"],
        "U": combo["U"], "V": combo["V"], "J": vals["J"],
        "L": combo["L"], "p": float(combo["p"]), "rho": float(combo["rho"]),
        "beta": vals["beta"], "alpha": vals["alpha"],
        "snr_db": stats.snr_db,
        "ber": stats.ber, "ber_se": stats.ber_se,
        "avg_delay_slots": None if delay is None else delay,
        "delay_se": stats.delay_se,
        "mmd_rate_ul": stats.mmd_rate_ul, "mmd_rate_dl": stats.mmd_rate_dl,
        "pep_theory_mean": stats.pep_mean, "pep_se": stats.pep_se,
        "slots_ma": stats.slots_ma, "slots_bc": stats.slots_bc,
        "packets_delivered": stats.groups_delivered,
        "seed": rep_seed,
    }


def _run_task(args) -> RunStats:
    cfg, snr, snr_index = args
    return run_cell(cfg, snr, snr_index)


def run_and_emit(spec: ExperimentSpec, out_path: str, jobs: int = 1) -> int:
    """Run every cell of the experiment and write the CSV atomically.

    Returns the number of data rows.  The output file appears only after
    all cells have completed (temp file + rename), so a failed run leaves
    no partial CSV behind.
    """
    master = spec.values["seed"]
    tasks = []
    keys = []
    for sweep_index, combo in enumerate(spec.combinations()):
        for rep in spec.seeds:
            cfg = spec.config_for(combo, derive_cell_seed(master, sweep_index, rep))
            for snr_index, snr in enumerate(spec.snr_db):
                tasks.append((cfg, snr, snr_index))
                keys.append((combo, rep))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]

    lines = [",".join(CSV_FIELDS)]
    for (combo, rep), stats in zip(keys, results):
        row = _row(spec, combo, rep, stats)
        lines.append(",".join(_format(row[f]) for f in CSV_FIELDS))

    out_dir = os.path.dirname(os.path.abspath(out_path))
    fd, tmp_path = tempfile.mkstemp(prefix=".chdlink-", dir=out_dir)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp_path, out_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    return len(lines) - 1


def parse_results(path: str) -> list:
    """Read an emitted CSV back into typed row dicts (round-trip helper)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if tuple(header) != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header in {path}")
        rows = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            row = {}
            for key, cell in zip(header, cells):
                if key == "label":
                    row[key] = cell
                elif cell == "":
                    row[key] = None
                else:
                    row[key] = _parse_scalar(cell)
            rows.append(row)
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chdlink",
        description="Monte Carlo sweeps of the cluster-head best-link relay "
                    "protocol; emits one CSV row per simulated cell.")
    parser.add_argument("--config", required=True, help="experiment file")
    parser.add_argument("--out", default="results.csv", help="output CSV path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--packets", type=int, default=None,
                        help="override delivered groups per SNR point")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel worker processes (cells are independent)")
    args = parser.parse_args(argv)

    try:
        spec = load_config(args.config)
        if args.seed is not None:
            spec.values["seed"] = args.seed
        if args.packets is not None:
            if args.packets < 1:
                raise ConfigError("--packets must be positive")
            spec.values["packets"] = args.packets
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        n = run_and_emit(spec, args.out, jobs=max(1, args.jobs))
    except (BufferContractError, RuntimeError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {n} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
