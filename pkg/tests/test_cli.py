import csv
import json
import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest
import yaml

from teampref.cli import main, write_curves
from teampref.config import TrainerConfig, defaults_for, load_config

TINY = {
    "env_id": "ma-mover",
    "seed": 1,
    "total_steps": 220,
    "pretrain_steps": 60,
    "feedback_frequency": 110,
    "queries_per_session": 3,
    "max_feedback_budget": 12,
    "segment_length": 10,
    "eval_every": 110,
    "eval_episodes": 1,
    "reward_epochs": 1,
    "reward_hidden": [16, 16],
    "sac_hidden": [16, 16],
    "sac_batch_size": 32,
    "buffer_capacity": 2_000,
}


def write_tiny_config(path, **overrides):
    data = {**TINY, **overrides}
    Path(path).write_text(yaml.safe_dump(data))
    return path


class TestDefaults:
    def test_highway_defaults_match_reference_settings(self):
        cfg = defaults_for("ma-highway-right", "pebble")
        assert cfg.feedback_frequency == 500
        assert cfg.queries_per_session == 25
        assert cfg.max_feedback_budget == 800
        assert cfg.segment_length == 30
        assert cfg.pretrain_steps == 1000
        assert cfg.gamma == 0.99
        assert cfg.sac_lr == 3e-4 and cfg.reward_lr == 3e-4
        assert cfg.n_ensemble_members == 3
        assert cfg.reward_hidden == (256, 256, 256)
        assert cfg.sac_init_temperature == 0.1
        assert cfg.sac_tau == 0.005 and cfg.sac_target_update_freq == 2

    def test_variant_segment_lengths_on_highway(self):
        assert defaults_for("ma-highway-right", "rune").segment_length == 20
        assert defaults_for("ma-highway-right", "surf").segment_length == 15

    def test_surf_table_values(self):
        cfg = defaults_for("ma-mover", "surf")
        assert cfg.surf_mu == 4 and cfg.surf_tau == 0.95 and cfg.surf_loss_weight == 1.0

    def test_unknown_fields_rejected_with_name(self):
        with pytest.raises(ValueError, match="bogus_field"):
            TrainerConfig.from_dict({"env_id": "ma-mover", "bogus_field": 1})


class TestCmdRun:
    def test_run_writes_outputs(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml")
        rc = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "runs")])
        assert rc == 0
        run_dir = tmp_path / "runs" / "ma-mover" / "pebble" / "hb1-eps1" / "seed1"
        assert (run_dir / "metrics.jsonl").exists()
        assert (run_dir / "config.resolved").exists()
        assert (run_dir / "checkpoints" / "reward_ensemble.bin").exists()
        assert (run_dir / "checkpoints" / "learner.pt").exists()
        records = [json.loads(l) for l in (run_dir / "metrics.jsonl").read_text().splitlines()]
        assert len(records) == 2

    def test_unknown_env_is_field_level_error(self, tmp_path, capsys):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml", env_id="ma-wat")
        rc = main(["run", "--config", str(cfg_path), "--out", str(tmp_path)])
        assert rc == 2
        assert "env_id" in capsys.readouterr().err

    def test_flag_overrides_file_value(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml", hb_fraction=1.0)
        rc = main(["run", "--config", str(cfg_path), "--hb", "0.5",
                   "--out", str(tmp_path / "runs")])
        assert rc == 0
        resolved = load_config(
            tmp_path / "runs" / "ma-mover" / "pebble" / "hb0.5-eps1" / "seed1"
            / "config.resolved"
        )
        assert resolved.hb_fraction == 0.5


class TestCmdMatrix:
    def test_access_suite_layout(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml")
        rc = main(["matrix", "--suite", "access", "--config", str(cfg_path),
                   "--seeds", "1", "2", "3", "--out", str(tmp_path / "runs")])
        assert rc == 0
        run_dirs = sorted((tmp_path / "runs" / "ma-mover" / "pebble").glob("*/seed*"))
        assert len(run_dirs) == 9  # 3 budgets x 3 seeds
        assert (tmp_path / "runs" / "access_curves.csv").exists()

    def test_specorch_suite_layout(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml")
        rc = main(["matrix", "--suite", "specorch", "--config", str(cfg_path),
                   "--seeds", "1", "2", "--out", str(tmp_path / "runs")])
        assert rc == 0
        run_dirs = sorted((tmp_path / "runs" / "ma-mover").glob("*/hb1-eps1/seed*"))
        assert len(run_dirs) == 6  # 3 algorithms x 2 seeds


class TestCmdCurves:
    def _one_run(self, tmp_path, seed=1, steps=220):
        cfg = TrainerConfig.from_dict({**TINY, "seed": seed, "total_steps": steps})
        from teampref.cli import execute_run

        return execute_run(cfg, tmp_path / "runs", quiet=True)

    def test_single_run_zero_std(self, tmp_path):
        run_dir = self._one_run(tmp_path)
        out = tmp_path / "curves.csv"
        write_curves([run_dir], out)
        rows = list(csv.DictReader(open(out)))
        assert all(float(r["std_return"]) == 0.0 for r in rows)
        assert [r["condition"] for r in rows] == ["pebble:hb1-eps1"] * len(rows)

    def test_identical_seeds_zero_std(self, tmp_path):
        d1 = self._one_run(tmp_path, seed=5)
        d2 = Path(str(d1) + "-copy")
        import shutil

        shutil.copytree(d1, d2)
        out = tmp_path / "curves.csv"
        write_curves([d1, d2], out)
        rows = list(csv.DictReader(open(out)))
        assert all(float(r["std_return"]) == 0.0 for r in rows)

    def test_misaligned_checkpoints_error_lists_steps(self, tmp_path):
        d1 = self._one_run(tmp_path, seed=1, steps=220)
        d2 = self._one_run(tmp_path, seed=2, steps=330)
        with pytest.raises(ValueError, match="misaligned"):
            write_curves([d1, d2], tmp_path / "curves.csv")


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestServePortCheck:
    def test_busy_port_is_a_startup_error(self, tmp_path, capsys):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml")
        with socket.socket() as holder:
            holder.bind(("127.0.0.1", 0))
            port = holder.getsockname()[1]
            rc = main(["serve", "--config", str(cfg_path), "--port", str(port),
                       "--out", str(tmp_path / "runs")])
        assert rc == 2
        assert "unavailable" in capsys.readouterr().err


@pytest.mark.slow
class TestCmdServe:
    def test_serve_end_to_end_with_http_labeler(self, tmp_path):
        import httpx

        # sessions must land after episode boundaries (multiples of 200) so
        # the segment bank has material to query
        cfg_path = write_tiny_config(
            tmp_path / "cfg.yaml", remote_timeout=60.0, max_feedback_budget=6,
            total_steps=500, feedback_frequency=200, eval_every=250,
        )
        port = free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "teampref.cli", "serve",
             "--config", str(cfg_path), "--port", str(port),
             "--out", str(tmp_path / "runs")],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        base = f"http://127.0.0.1:{port}"
        labeled = 0
        try:
            deadline = time.time() + 120
            while proc.poll() is None and time.time() < deadline:
                try:
                    resp = httpx.get(f"{base}/api/queries/next", timeout=2.0)
                except httpx.HTTPError:
                    time.sleep(0.2)
                    continue
                if resp.status_code != 200:
                    time.sleep(0.05)
                    continue
                qid = resp.json()["query_id"]
                post = httpx.post(f"{base}/api/labels",
                                  json={"query_id": qid, "preference": labeled % 2},
                                  timeout=2.0)
                if post.status_code == 200:
                    labeled += 1
            proc.wait(timeout=60)
        finally:
            if proc.poll() is None:
                proc.kill()
        assert proc.returncode == 0, proc.stdout.read()
        metrics_path = (tmp_path / "runs" / "ma-mover" / "pebble" / "hb1-eps1"
                        / "seed1" / "metrics.jsonl")
        records = [json.loads(l) for l in metrics_path.read_text().splitlines()]
        assert labeled >= 6
        assert records[-1]["labels_used"] == 6

    def test_sigterm_flushes_checkpoints(self, tmp_path):
        cfg_path = write_tiny_config(tmp_path / "cfg.yaml", total_steps=60_000,
                                     remote_timeout=0.5)
        port = free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "teampref.cli", "serve",
             "--config", str(cfg_path), "--port", str(port),
             "--out", str(tmp_path / "runs")],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
        )
        time.sleep(12)  # into the training loop
        proc.send_signal(signal.SIGTERM)
        proc.wait(timeout=30)
        run_dir = tmp_path / "runs" / "ma-mover" / "pebble" / "hb1-eps1" / "seed1"
        assert (run_dir / "checkpoints" / "reward_ensemble.bin").exists()
        assert (run_dir / "metrics.jsonl").exists()
