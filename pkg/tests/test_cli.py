import json

from came_opt.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_error(err):
    return json.loads(err.strip().splitlines()[-1])["error"]


def test_run_writes_trace_and_summary(tmp_path, capsys):
    out = str(tmp_path / "q")
    code, stdout, _ = run_cli(
        capsys,
        "run", "--problem", "quadratic:dim=4", "--optimizer", "adam",
        "--steps", "25", "--lr", "0.01", "--seed", "2", "--out", out,
    )
    assert code == 0
    assert "final_loss=" in stdout
    trace = open(out + "_trace.csv").read().splitlines()
    assert trace[0] == "step,loss,grad_rms,update_rms,lr,elapsed_ms"
    assert len(trace) == 26
    summary = json.loads(open(out + "_summary.json").read())
    assert summary["optimizer"] == "adam"
    assert summary["problem_args"] == {"dim": 4}
    assert summary["steps"] == 25
    assert "total_wall_ms" in summary


def test_run_strict_mode_is_byte_identical(tmp_path, capsys):
    blobs = []
    for tag in ("a", "b"):
        out = str(tmp_path / tag)
        code, _, _ = run_cli(
            capsys,
            "run", "--problem", "mlp1", "--optimizer", "came", "--steps", "10",
            "--seed", "7", "--out", out, "--strict-determinism",
        )
        assert code == 0
        blobs.append(
            (
                open(out + "_trace.csv", "rb").read(),
                open(out + "_summary.json", "rb").read(),
            )
        )
        header = open(out + "_trace.csv").read().splitlines()[0]
        assert header == "step,loss,grad_rms,update_rms,lr"
        timing = open(out + "_timing.csv").read().splitlines()
        assert timing[0] == "step,elapsed_ms"
    assert blobs[0] == blobs[1]


def test_run_prints_plain_floats(tmp_path, capsys):
    code, stdout, _ = run_cli(
        capsys,
        "run", "--problem", "rosenbrock", "--steps", "5", "--seed", "1",
        "--out", str(tmp_path / "rb"),
    )
    assert code == 0
    assert "np.float64" not in stdout


def test_unknown_problem_emits_error_json(tmp_path, capsys):
    code, _, err = run_cli(
        capsys, "run", "--problem", "nope", "--out", str(tmp_path / "x")
    )
    assert code == 1
    payload = read_error(err)
    assert "unknown problem" in payload["message"]


def test_invalid_hyperparameter_names_field(tmp_path, capsys):
    code, _, err = run_cli(
        capsys,
        "run", "--problem", "quadratic", "--lr", "0", "--out", str(tmp_path / "x"),
    )
    assert code == 1
    assert read_error(err)["field"] == "lr"


def test_zero_steps_names_field(tmp_path, capsys):
    code, _, err = run_cli(
        capsys,
        "run", "--problem", "quadratic", "--steps", "0", "--out", str(tmp_path / "x"),
    )
    assert code == 1
    assert read_error(err)["field"] == "steps"


def test_missing_out_is_reported(capsys):
    code, _, err = run_cli(capsys, "run", "--problem", "quadratic")
    assert code == 1
    assert read_error(err)["field"] == "out"


def test_bad_problem_spec_reported(tmp_path, capsys):
    code, _, err = run_cli(
        capsys,
        "run", "--problem", "quadratic:dim=four", "--out", str(tmp_path / "x"),
    )
    assert code == 1
    assert read_error(err)["field"] == "problem"


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# experiment defaults\n"
        "problem = quadratic:dim=3\n"
        "optimizer = adafactor\n"
        "steps = 7\n"
        "lr = 0.5\n"
    )
    out = str(tmp_path / "c")
    code, _, _ = run_cli(
        capsys, "run", "--config", str(cfg), "--lr", "0.25", "--out", out
    )
    assert code == 0
    summary = json.loads(open(out + "_summary.json").read())
    assert summary["optimizer"] == "adafactor"  # from file
    assert summary["steps"] == 7  # from file
    assert summary["optimizer_config"]["lr"] == 0.25  # flag beats file
    assert summary["optimizer_config"]["beta2"] == 0.999  # default fills the rest


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("stepz = 7\n")
    code, _, err = run_cli(
        capsys, "run", "--config", str(cfg), "--problem", "quadratic",
        "--out", str(tmp_path / "x"),
    )
    assert code == 1
    assert read_error(err)["field"] == "stepz"


def test_compare_cli_writes_columns(tmp_path, capsys):
    out = str(tmp_path / "cmp")
    code, stdout, _ = run_cli(
        capsys,
        "compare", "--problem", "quadratic:dim=3", "--optimizer", "came,adafactor",
        "--steps", "30", "--lr", "0.01", "--seeds", "1,2", "--out", out,
    )
    assert code == 0
    assert "median final loss" in stdout
    lines = open(out + "_compare.csv").read().splitlines()
    assert lines[0] == "step,came,adafactor"
    assert len(lines) == 31
    payload = json.loads(open(out + "_compare.json").read())
    assert set(payload["optimizers"]) == {"came", "adafactor"}
    assert payload["seeds"] == [1, 2]


def test_compare_cli_bad_seeds(capsys):
    code, _, err = run_cli(
        capsys, "compare", "--problem", "quadratic", "--seeds", "1,x"
    )
    assert code == 1
    assert read_error(err)["field"] == "seeds"


def test_grad_check_cli_passes(capsys):
    code, stdout, _ = run_cli(
        capsys, "grad-check", "--problem", "rosenbrock", "--tolerance", "1e-8"
    )
    assert code == 0
    assert stdout.startswith("PASS")


def test_grad_check_cli_fails_on_absurd_tolerance(capsys):
    code, stdout, err = run_cli(
        capsys, "grad-check", "--problem", "mlp1", "--points", "2",
        "--tolerance", "1e-18",
    )
    assert code == 1
    assert "FAIL" in stdout
    payload = read_error(err)
    assert payload["parameters"]


def test_memory_cli_bundled_and_file(tmp_path, capsys):
    code, stdout, _ = run_cli(capsys, "memory")
    assert code == 0
    assert "came" in stdout and "vs adam" in stdout

    manifest = tmp_path / "tiny.txt"
    manifest.write_text("w 64 32\nb 32\n")
    out = str(tmp_path / "mem")
    code, stdout, _ = run_cli(
        capsys, "memory", "--manifest", str(manifest), "--baseline", "adafactor",
        "--scale", "2", "--out", out,
    )
    assert code == 0
    payload = json.loads(open(out + "_memory.json").read())
    assert payload["baseline"] == "adafactor"
    assert payload["totals"]["adam"] == 2 * (128 * 64 + 64)


def test_memory_cli_missing_file(capsys):
    code, _, err = run_cli(capsys, "memory", "--manifest", "/no/such/file.txt")
    assert code == 1
    assert "message" in read_error(err)
