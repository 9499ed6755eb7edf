import json

import pytest

from icmap.cli import main
from icmap.mapstore import load_map
from icmap.synth import make_scene, read_scene, write_scene

from conftest import zero_noise_config


@pytest.fixture()
def scene_path(tmp_path):
    path = tmp_path / "scene.json"
    write_scene(make_scene(zero_noise_config("arc", seed=5)), path)
    return path


def run_cli(*args):
    return main([str(a) for a in args])


class TestSynthCmd:
    def test_default_scene(self, tmp_path):
        out = tmp_path / "s.json"
        assert run_cli("synth", "--seed", 3, "--out", out) == 0
        scene = read_scene(out)
        assert len(scene.gt.instances) >= 3
        assert len(scene.frames) > 0

    def test_same_seed_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("synth", "--seed", 3, "--out", a)
        run_cli("synth", "--seed", 3, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_range_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("synth", "--seed", 1, "--out", tmp_path / "x.json", "--range", "wide")
        assert exc.value.code == 2

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("curvature = s_curve\nradius = 80\nframe_count = 8\n# comment\n")
        out = tmp_path / "s.json"
        assert run_cli("synth", "--config", cfg, "--seed", 1, "--out", out) == 0
        assert "s_curve" in read_scene(out).scene_id

    def test_count_multi(self, tmp_path):
        assert run_cli("synth", "--seed", 0, "--count", 3, "--out-dir", tmp_path, "--jobs", 1) == 0
        assert sorted(p.name for p in tmp_path.glob("scene_*.json")) == [
            "scene_000.json", "scene_001.json", "scene_002.json"
        ]


class TestRunCmd:
    def test_zero_noise_map(self, scene_path, tmp_path):
        out_map = tmp_path / "m.json"
        trace = tmp_path / "t.json"
        assert run_cli("run", scene_path, "--out-map", out_map, "--trace", trace) == 0
        gmap = load_map(out_map)
        scene = read_scene(scene_path)
        from icmap.metrics import global_map_cd

        cd, mcd = global_map_cd(gmap, scene.gt)
        assert mcd < 0.1
        doc = json.loads(trace.read_text())
        assert len(doc["frames"]) == len(scene.frames)
        assert all("matches" in f and "det_count" in f for f in doc["frames"])

    def test_no_fusion_flag(self, scene_path, tmp_path):
        out_map = tmp_path / "m.json"
        assert run_cli("run", scene_path, "--out-map", out_map, "--no-fusion") == 0
        assert load_map(out_map).instances

    def test_empty_scene(self, tmp_path):
        doc = {
            "format_version": "1",
            "scene_id": "empty",
            "range": [100.0, 50.0],
            "gt": {"instances": []},
            "frames": [],
        }
        scene = tmp_path / "empty.json"
        scene.write_text(json.dumps(doc))
        out_map = tmp_path / "m.json"
        assert run_cli("run", scene, "--out-map", out_map) == 0
        assert load_map(out_map).instances == {}

    def test_out_of_order_frames(self, scene_path, tmp_path):
        doc = json.loads(scene_path.read_text())
        doc["frames"][3]["t"] = 0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("run", bad, "--out-map", tmp_path / "m.json") == 1


class TestEvalCmd:
    def test_perfect_pipeline(self, scene_path, tmp_path, capsys):
        out_map = tmp_path / "m.json"
        trace = tmp_path / "t.json"
        run_cli("run", scene_path, "--out-map", out_map, "--trace", trace)
        report = tmp_path / "r.json"
        code = run_cli(
            "eval", "--scene", scene_path, "--pred-map", out_map, "--trace", trace,
            "--mot", "--report", report,
        )
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["mAP"] == pytest.approx(1.0)
        assert all(v == pytest.approx(1.0) for v in doc["mota"].values())
        assert doc["mCD"] < 0.1
        assert "class" in capsys.readouterr().out

    def test_small_scale_thresholds_accepted(self, scene_path, tmp_path):
        out_map = tmp_path / "m.json"
        trace = tmp_path / "t.json"
        run_cli("run", scene_path, "--out-map", out_map, "--trace", trace)
        report = tmp_path / "r.json"
        code = run_cli(
            "eval", "--scene", scene_path, "--pred-map", out_map, "--trace", trace,
            "--mot", "--thresholds", "0.5,1.0,1.5", "--report", report,
        )
        assert code == 0
        assert json.loads(report.read_text())["ap_thresholds"] == [0.5, 1.0, 1.5]

    def test_mot_without_trace_errors(self, scene_path, tmp_path, capsys):
        out_map = tmp_path / "m.json"
        run_cli("run", scene_path, "--out-map", out_map)
        code = run_cli("eval", "--scene", scene_path, "--pred-map", out_map, "--mot")
        assert code == 1
        assert "trace" in capsys.readouterr().err

    def test_multi_scene_aggregate(self, tmp_path):
        pred_dir = tmp_path / "pred"
        pred_dir.mkdir()
        scenes = []
        for i, curv in enumerate(("straight", "arc")):
            sp = tmp_path / f"scene_{i:03d}.json"
            write_scene(make_scene(zero_noise_config(curv, seed=20 + i)), sp)
            run_cli("run", sp, "--out-map", pred_dir / f"scene_{i:03d}.map.json",
                    "--trace", pred_dir / f"scene_{i:03d}.trace.json")
            scenes.append(sp)
        report = tmp_path / "agg.json"
        code = run_cli("eval", "--scene", *scenes, "--pred-dir", pred_dir,
                       "--mot", "--jobs", 2, "--report", report)
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["mAP"] == pytest.approx(1.0)
        assert doc["mCD"] < 0.1
        assert all(v == pytest.approx(1.0) for v in doc["mota"].values())


class TestSweepCmd:
    def test_grid_rows(self, scene_path, tmp_path):
        out = tmp_path / "table.tsv"
        code = run_cli("sweep-s", scene_path, "--s-grid", "0:2:0.1", "--out", out)
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 21
        assert lines[0].startswith("s\tcd_")

    def test_single_value_grid(self, scene_path, tmp_path):
        out = tmp_path / "table.tsv"
        assert run_cli("sweep-s", scene_path, "--s-grid", "0.5:0.5:1", "--out", out) == 0
        assert len(out.read_text().strip().splitlines()) == 2

    def test_malformed_grid_usage_error(self, scene_path, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("sweep-s", scene_path, "--s-grid", "nope", "--out", tmp_path / "t.tsv")
        assert exc.value.code == 2

    def test_plot_emitted(self, scene_path, tmp_path):
        out = tmp_path / "table.tsv"
        plot = tmp_path / "chart.svg"
        run_cli("sweep-s", scene_path, "--s-grid", "0:1:0.5", "--out", out, "--plot", plot)
        text = plot.read_text()
        assert text.startswith("<?xml") and "<svg" in text

    def test_noisy_scene_argmin_in_band(self, tmp_path):
        # averaged over four noisy s-curve scenes, the error-minimizing s
        # falls in the recommended [0.1, 1.0] band for every class column
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(
            "curvature = s_curve\nradius = 40\nroad_length = 64\ncrossing_count = 0\n"
            "frame_count = 18\nframe_spacing = 2.0\nrange = 60x30\njitter_sigma = 0.3\n"
        )
        assert run_cli("synth", "--config", cfg, "--seed", 4, "--count", 4,
                       "--out-dir", tmp_path, "--jobs", 2) == 0
        scenes = sorted(tmp_path.glob("scene_*.json"))
        out = tmp_path / "table.tsv"
        assert run_cli("sweep-s", *scenes, "--s-grid", "0:2:0.1", "--out", out,
                       "--jobs", 2) == 0
        lines = out.read_text().strip().splitlines()
        header = lines[0].split("\t")
        rows = [[float(v) for v in ln.split("\t")] for ln in lines[1:]]
        assert len(rows) == 21
        for col in range(1, len(header)):
            best = min(rows, key=lambda r: r[col])[0]
            assert 0.1 <= best <= 1.0, f"{header[col]} argmin {best}"


class TestRenderCmd:
    def test_empty_map(self, tmp_path):
        from icmap.mapstore import GlobalMap, save_map

        mpath = tmp_path / "m.json"
        save_map(GlobalMap("e"), mpath)
        out = tmp_path / "o.svg"
        assert run_cli("render", mpath, "--out", out) == 0
        assert "<svg" in out.read_text()

    def test_overlay_layers(self, scene_path, tmp_path):
        out_map = tmp_path / "m.json"
        run_cli("run", scene_path, "--out-map", out_map)
        out = tmp_path / "o.svg"
        assert run_cli("render", out_map, "--gt", scene_path, "--out", out) == 0
        text = out.read_text()
        assert 'id="gt-0"' in text and 'id="map-0"' in text

    def test_byte_stable(self, scene_path, tmp_path):
        out_map = tmp_path / "m.json"
        run_cli("run", scene_path, "--out-map", out_map)
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        run_cli("render", out_map, "--out", a)
        run_cli("render", out_map, "--out", b)
        assert a.read_bytes() == b.read_bytes()
