import json

import numpy as np
import pytest

from panofuse import read_raw_grid
from panofuse.cli import main

SMALL = {
    "pano_height": 8,
    "pano_width": 64,
    "channels": 1,
    "crop_height": 8,
    "crop_width": 32,
    "schedule": {"num_steps": 6},
    "view_stride": 8,
    "cross_stride": 4,
    "denoiser": {"kind": "crop_anchored", "target": {"pattern": "horizontal-ramp", "slope": 0.05}},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(SMALL))
    return path


def test_panorama_command(tmp_path, config_path, capsys):
    out = tmp_path / "out"
    rc = main(["panorama", "--config", str(config_path), "--out-dir", str(out), "--seed", "9"])
    assert rc == 0
    assert (out / "panorama.pnf").exists()
    assert (out / "panorama.pgm").exists()
    assert (out / "panorama_seam.csv").exists()
    assert (out / "panorama_timing.csv").exists()
    assert "seam_ratio=" in capsys.readouterr().out


def test_panorama_overrides_change_output(tmp_path, config_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    main(["panorama", "--config", str(config_path), "--out-dir", str(a), "--variant", "baseline"])
    main(["panorama", "--config", str(config_path), "--out-dir", str(b), "--variant", "twin",
          "--lambda", "0.0", "--tau", "0"])
    ga = read_raw_grid(a / "panorama.pnf")
    gb = read_raw_grid(b / "panorama.pnf")
    assert ga.shape == gb.shape
    assert not np.array_equal(ga, gb)


def test_twin_command(tmp_path, config_path, capsys):
    out = tmp_path / "twin"
    rc = main(["twin", "--config", str(config_path), "--out-dir", str(out)])
    assert rc == 0
    for stem in ("twin_first", "twin_second_raw", "twin_second_fused"):
        assert (out / f"{stem}.pnf").exists()
        assert (out / f"{stem}.pgm").exists()
    assert "overlap_rms_raw=" in capsys.readouterr().out


def test_ablate_command(tmp_path, config_path):
    out = tmp_path / "ablate"
    rc = main(["ablate", "--config", str(config_path), "--out-dir", str(out),
               "--param", "lambda", "--values", "0.5,2"])
    assert rc == 0
    lines = (out / "ablate.csv").read_text().strip().splitlines()
    assert lines[0].startswith("param,value,seam_ratio")
    assert len(lines) == 3
    assert lines[1].startswith("lambda,0.5,")


def test_bench_command(tmp_path, config_path):
    out = tmp_path / "bench"
    rc = main(["bench", "--config", str(config_path), "--out-dir", str(out),
               "--view-strides", "8,16", "--repetitions", "1"])
    assert rc == 0
    lines = (out / "bench.csv").read_text().strip().splitlines()
    assert lines[0] == "view_stride,windows,denoiser_calls,median_seconds,seam_ratio"
    calls = [int(line.split(",")[2]) for line in lines[1:]]
    assert calls[0] > calls[1]


def test_config_errors_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"view_stride": 0}')
    rc = main(["panorama", "--config", str(bad), "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err
