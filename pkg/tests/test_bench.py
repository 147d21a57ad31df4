import json
import subprocess
import sys

import pytest

from gatefuse.bench import (
    BenchConfig,
    BenchReport,
    main,
    reports_from_csv,
    reports_from_json,
    reports_to_csv,
    reports_to_json,
    run_bench,
    scan_blocks,
)

FAST = dict(reps=1, warmup=0)


def _non_timing(report):
    return {k: v for k, v in vars(report).items() if k not in BenchReport.TIMING_FIELDS}


def test_counter_shape_fused_vs_naive():
    fused = run_bench(BenchConfig(9, 1, layer_width=20, mode="fused", **FAST))
    naive = run_bench(BenchConfig(9, 1, layer_width=20, mode="naive", **FAST))
    assert fused.forward_traversals == 8
    assert naive.forward_traversals == 80
    assert fused.total_traversals == 8 + 8 + 2


def test_block_peak_reported():
    from gatefuse.checkpoint import fused_layer_units
    from gatefuse.circuit import build_hea
    from gatefuse.fusion import fuse_circuit

    r = run_bench(BenchConfig(8, 100, layer_width=20, block=4, **FAST))
    # the folded shape depends on the register size; read it back from the fused circuit
    units = fused_layer_units(fuse_circuit(build_hea(8, 1, layer_width=20)))
    assert r.peak_units == units * 4 + 25
    r9 = run_bench(BenchConfig(9, 100, layer_width=20, block=4, **FAST))
    assert r9.peak_units == 53
    assert r9.peak_bytes == 53 * r9.sv_bytes


def test_zero_reps_rejected():
    with pytest.raises(ValueError):
        run_bench(BenchConfig(4, 1, reps=0))


@pytest.mark.parametrize("kwargs", [
    dict(block=3, layers=10), dict(mode="turbo"), dict(precision="half"),
    dict(batch=0), dict(observable="XX"), dict(warmup=-1), dict(layer_width=2),
])
def test_invalid_configs(kwargs):
    base = dict(n_qubits=4, layers=2) | kwargs
    with pytest.raises(ValueError):
        BenchConfig(**base).validate()


def test_scan_blocks_argmin():
    cfg = BenchConfig(9, 100, layer_width=20, **FAST)
    blocks = [1, 2, 4, 5, 10, 20, 25, 50]
    full = {r.block: r.peak_units for r in scan_blocks(cfg, blocks)}
    assert min(full, key=full.get) == 4 and full[4] == 53
    saved = {r.block: r.peak_units
             for r in scan_blocks(BenchConfig(9, 100, layer_width=20, mode="fused_mem_save", **FAST), blocks)}
    assert min(saved, key=saved.get) == 5 and saved[5] == 37.5


def test_scan_single_block_covers_all_layers():
    [r] = scan_blocks(BenchConfig(9, 16, layer_width=20, **FAST), [16])
    assert r.peak_units == 7 * 16 + 1


def test_checksums_agree_across_modes():
    common = dict(n_qubits=6, layers=4, batch=2, precision="double", seed=5, **FAST)
    sums = [run_bench(BenchConfig(mode=m, block=b, **common)).grad_checksum
            for m, b in [("naive", None), ("fused", None), ("fused", 2), ("naive", 2)]]
    for s in sums[1:]:
        assert abs(s - sums[0]) <= 1e-9 * abs(sums[0])


def test_csv_round_trip():
    reports = [run_bench(BenchConfig(5, 2, block=b, precision="double", **FAST)) for b in (None, 1)]
    back = reports_from_csv(reports_to_csv(reports))
    assert [_non_timing(r) for r in back] == [_non_timing(r) for r in reports]
    assert back[0].block is None and back[1].block == 1


def test_json_round_trip():
    reports = [run_bench(BenchConfig(5, 2, mode="fused_mem_save", **FAST))]
    text = reports_to_json(reports)
    assert json.loads(text)["schema_version"] == 1
    back = reports_from_json(text)
    assert [_non_timing(r) for r in back] == [_non_timing(r) for r in reports]


def test_json_schema_checked():
    with pytest.raises(ValueError):
        reports_from_json('{"schema_version": 99, "runs": []}')


def test_main_writes_file(tmp_path):
    out = tmp_path / "r.json"
    code = main(["--qubits", "4", "--layers", "2", "--reps", "2", "--warmup", "1",
                 "--format", "json", "--out", str(out)])
    assert code == 0
    [r] = reports_from_json(out.read_text())
    assert r.reps == 2 and r.std_s >= 0 and r.samples_per_s > 0


def test_main_exit_codes(capsys):
    assert main(["--qubits", "4", "--layers", "10", "--block", "3"]) == 2
    assert main(["--qubits", "34", "--layers", "1"]) == 3
    assert main(["--qubits", "4", "--layers", "2", "--threads", "9999"]) == 2
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gatefuse.bench", "--qubits", "4", "--layers", "1",
         "--reps", "1", "--warmup", "0"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    [r] = reports_from_csv(proc.stdout)
    assert r.forward_traversals == 3


def test_argparse_rejects_unknown_mode():
    with pytest.raises(SystemExit) as exc:
        main(["--qubits", "4", "--layers", "1", "--mode", "turbo"])
    assert exc.value.code == 2
