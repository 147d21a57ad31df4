"""Benchmark harness for the gradient executors.

Builds a hardware-efficient ansatz, times one gradient evaluation per
repetition and reports wall-clock statistics, throughput, traversal counts
and stored-vector units.  Usage::

    python -m gatefuse.bench --qubits 16 --layers 1 --batch 16 --mode fused
    python -m gatefuse.bench --qubits 9 --layer-width 20 --layers 100 \\
        --mode fused --scan-blocks 1,2,4,5,10,20,25,50 --reps 1 --warmup 0

Exit status: 0 on success, 2 for an invalid configuration, 3 when the
workload exceeds the allocation limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .accounting import MemoryAccountant, TraversalCounter
from .checkpoint import (
    fused_layer_units,
    model_native,
    run_checkpointed,
    run_checkpointed_naive,
)
from .circuit import build_hea, hea_observable, parse_pauli
from .engine import get_threads, gradient, naive_gradient, set_threads
from .fusion import fuse_circuit
from .statevec import PRECISIONS, CapacityError, check_capacity, new_random_state, state_bytes

SCHEMA_VERSION = 1
BENCH_MODES = ("naive", "fused", "fused_mem_save")
WORKING_BUFFERS = 3

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY = 0, 2, 3


@dataclass(frozen=True)
class BenchConfig:
    n_qubits: int
    layers: int
    batch: int = 1
    mode: str = "fused"
    block: int | None = None
    precision: str = "single"
    seed: int = 0
    observable: str | None = None
    reps: int = 5
    warmup: int = 3
    threads: int | None = None
    layer_width: int | None = None

    def validate(self) -> None:
        if self.n_qubits < 2:
            raise ValueError("need at least two qubits")
        if self.layers < 1:
            raise ValueError("need at least one layer")
        if self.batch < 1:
            raise ValueError("batch must be positive")
        if self.mode not in BENCH_MODES:
            raise ValueError(f"mode must be one of {BENCH_MODES}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.warmup < 0:
            raise ValueError("warmup cannot be negative")
        if self.block is not None and (self.block < 1 or self.layers % self.block):
            raise ValueError(f"block {self.block} does not divide {self.layers} layers")
        if self.layer_width is not None and self.layer_width < self.n_qubits:
            raise ValueError("layer width cannot be smaller than the register")
        if self.observable is not None and len(self.observable) != self.n_qubits:
            raise ValueError("observable length must equal the qubit count")

    @property
    def observable_label(self) -> str:
        return self.observable or hea_observable(self.n_qubits)


@dataclass
class BenchReport:
    schema_version: int
    tool_version: str
    n_qubits: int
    layers: int
    batch: int
    mode: str
    block: int | None
    precision: str
    seed: int
    observable: str
    reps: int
    warmup: int
    threads: int
    layer_width: int | None
    forward_traversals: int
    backward_traversals: int
    other_traversals: int
    conversions: int
    total_traversals: int
    peak_units: float
    peak_bytes: int
    sv_bytes: int
    loss: float
    grad_checksum: float
    mean_s: float
    std_s: float
    samples_per_s: float

    TIMING_FIELDS = ("mean_s", "std_s", "samples_per_s")


_FIELD_TYPES = {f.name: f.type for f in fields(BenchReport)}


def _predicted_units(cfg: BenchConfig, circuit, fused) -> float:
    d = cfg.layers
    if cfg.mode == "naive":
        per_layer = len(circuit.gates) // d
        return per_layer * d + 1 if cfg.block is None else model_native(cfg.block, per_layer, 0, d)
    units = fused_layer_units(fused, "mem_save" if cfg.mode == "fused_mem_save" else "full")
    if cfg.block is None:
        return units * d
    return units * cfg.block + d // cfg.block


def _workload(cfg: BenchConfig):
    circuit = build_hea(cfg.n_qubits, cfg.layers, seed=cfg.seed, layer_width=cfg.layer_width)
    fused = fuse_circuit(circuit)
    sv = state_bytes(cfg.n_qubits, cfg.batch, cfg.precision)
    check_capacity(int(sv * (_predicted_units(cfg, circuit, fused) + WORKING_BUFFERS)),
                   "benchmark working set")
    state = new_random_state(cfg.n_qubits, cfg.batch, seed=cfg.seed + 1, precision=cfg.precision)
    return circuit, fused, state


def _one_gradient(cfg, circuit, fused, state, pauli):
    counter = TraversalCounter()
    acct = MemoryAccountant(state.nbytes)
    ledger_mode = "mem_save" if cfg.mode == "fused_mem_save" else "full"
    if cfg.mode == "naive":
        if cfg.block is None:
            loss, grad = naive_gradient(circuit, state, pauli=pauli, counter=counter, accountant=acct)
        else:
            loss, grad, _ = run_checkpointed_naive(circuit, state, pauli=pauli, b=cfg.block,
                                                   counter=counter, accountant=acct)
    elif cfg.block is None:
        loss, grad = gradient(fused, state, pauli=pauli, mode=ledger_mode,
                              counter=counter, accountant=acct)
    else:
        loss, grad, _ = run_checkpointed(fused, state, pauli=pauli, b=cfg.block, mode=ledger_mode,
                                         counter=counter, accountant=acct)
    return loss, grad, counter, acct


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Warm up, then time ``cfg.reps`` gradient evaluations."""
    cfg.validate()
    if cfg.threads is not None:
        set_threads(cfg.threads)
    circuit, fused, state = _workload(cfg)
    pauli = parse_pauli(cfg.observable_label)
    for _ in range(cfg.warmup):
        _one_gradient(cfg, circuit, fused, state, pauli)
    times = []
    for _ in range(cfg.reps):
        t0 = time.perf_counter()
        loss, grad, counter, acct = _one_gradient(cfg, circuit, fused, state, pauli)
        times.append(time.perf_counter() - t0)
    mean = statistics.fmean(times)
    return BenchReport(
        schema_version=SCHEMA_VERSION,
        tool_version=__version__,
        n_qubits=cfg.n_qubits,
        layers=cfg.layers,
        batch=cfg.batch,
        mode=cfg.mode,
        block=cfg.block,
        precision=cfg.precision,
        seed=cfg.seed,
        observable=cfg.observable_label,
        reps=cfg.reps,
        warmup=cfg.warmup,
        threads=get_threads(),
        layer_width=cfg.layer_width,
        forward_traversals=counter.forward,
        backward_traversals=counter.backward,
        other_traversals=counter.other,
        conversions=counter.conversions,
        total_traversals=counter.total,
        peak_units=acct.peak,
        peak_bytes=acct.peak_bytes,
        sv_bytes=state.nbytes,
        loss=loss,
        grad_checksum=float(np.sum(grad)),
        mean_s=mean,
        std_s=statistics.stdev(times) if len(times) > 1 else 0.0,
        samples_per_s=cfg.batch / mean if mean > 0 else float("inf"),
    )


def scan_blocks(cfg: BenchConfig, blocks) -> list[BenchReport]:
    """One report per checkpoint block size (each must divide ``cfg.layers``)."""
    configs = [BenchConfig(**(asdict(cfg) | {"block": b})) for b in blocks]
    for c in configs:
        c.validate()
    return [run_bench(c) for c in configs]


# -- report serialisation --------------------------------------------------

FIELD_NAMES = [f.name for f in fields(BenchReport)]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_cell(name: str, text: str):
    typ = _FIELD_TYPES[name]
    if text == "" and "None" in typ:
        return None
    if typ.startswith("int"):
        return int(text)
    if typ.startswith("float"):
        return float(text)
    return text


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELD_NAMES)
    for r in reports:
        writer.writerow([_cell(getattr(r, k)) for k in FIELD_NAMES])
    return buf.getvalue()


def reports_from_csv(text: str) -> list[BenchReport]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [BenchReport(**{k: _parse_cell(k, row[k]) for k in FIELD_NAMES}) for row in rows]


def reports_to_json(reports) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION,
                       "runs": [asdict(r) for r in reports]}, indent=2)


def reports_from_json(text: str) -> list[BenchReport]:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema_version')!r}")
    return [BenchReport(**run) for run in doc["runs"]]


# -- command line ----------------------------------------------------------


def _block_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gatefuse-bench", description=__doc__.split("\n\n")[0])
    p.add_argument("--qubits", type=int, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--mode", choices=BENCH_MODES, default="fused")
    p.add_argument("--block", type=int, default=None, help="checkpoint block size in layers")
    p.add_argument("--scan-blocks", type=_block_list, default=None,
                   help="comma-separated block sizes; one run each")
    p.add_argument("--precision", choices=PRECISIONS, default="single")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--observable", default=None, help="Pauli label, default IXYZ repeated")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--layer-width", type=int, default=None,
                   help="build each layer for this many logical qubits, folded onto the register")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = BenchConfig(
        n_qubits=args.qubits, layers=args.layers, batch=args.batch, mode=args.mode,
        block=args.block, precision=args.precision, seed=args.seed,
        observable=args.observable, reps=args.reps, warmup=args.warmup,
        threads=args.threads, layer_width=args.layer_width,
    )
    try:
        if args.scan_blocks is not None:
            if args.block is not None:
                raise ValueError("--block and --scan-blocks are mutually exclusive")
            cfg.validate()
            reports = scan_blocks(cfg, args.scan_blocks)
        else:
            reports = [run_bench(cfg)]
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = reports_to_csv(reports) if args.format == "csv" else reports_to_json(reports)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
