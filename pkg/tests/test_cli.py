import csv

import numpy as np
import pytest

from fhtnet.cli import arch_path, load_network, main, parse_config_text
from fhtnet.nn import Network
from fhtnet.oracle import build_fht_matrix
from fhtnet.pgm import encode_pgm, read_pgm, write_pgm
from fhtnet.vp import evaluate, load_dataset, network_candidates


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    assert main(["synth", f"out={root}", "image_side=32", "n_samples=6", "seed=3"]) == 0
    return root


def _raw(path):
    data = np.fromfile(path, dtype="<f8")
    side = int(np.sqrt(data.size))
    return data.reshape(side, side)


# --- fht ----------------------------------------------------------------------------


def test_fht_all_ones(tmp_path, capsys):
    write_pgm(tmp_path / "in.pgm", np.ones((8, 8)))
    code, _, _ = run(capsys, "fht", tmp_path / "in.pgm", tmp_path / "out.pgm", "--raw", tmp_path / "out.f64")
    assert code == 0
    out = read_pgm(tmp_path / "out.pgm")
    assert out.shape == (8, 8) and len(np.unique(out)) == 1
    np.testing.assert_array_equal(_raw(tmp_path / "out.f64"), 8.0)


def test_fht_transposed_twice_matches_oracle(tmp_path, capsys, rng):
    img = rng.integers(0, 256, (8, 8))
    write_pgm(tmp_path / "in.pgm", img)
    assert run(capsys, "fht", tmp_path / "in.pgm", tmp_path / "a.pgm", "--transposed", "--raw", tmp_path / "a.f64")[0] == 0
    assert run(capsys, "fht", tmp_path / "a.f64", tmp_path / "b.pgm", "--transposed", "--raw", tmp_path / "b.f64")[0] == 0
    a = build_fht_matrix(3)
    expected = a.apply(a.apply(img, transpose=True), transpose=True)
    np.testing.assert_allclose(_raw(tmp_path / "b.f64"), expected, rtol=1e-9)


@pytest.mark.parametrize("q", ["hd", "hu", "vr", "vl"])
def test_fht_quadrants(tmp_path, capsys, q):
    write_pgm(tmp_path / "in.pgm", np.eye(16) * 200)
    assert run(capsys, "fht", tmp_path / "in.pgm", tmp_path / "o.pgm", "--quadrant", q)[0] == 0


def test_fht_non_pow2(tmp_path, capsys):
    (tmp_path / "odd.pgm").write_bytes(encode_pgm(np.ones((5, 7))))
    code, _, err = run(capsys, "fht", tmp_path / "odd.pgm", tmp_path / "o.pgm")
    assert code == 2 and "power-of-two" in err
    assert run(capsys, "fht", tmp_path / "odd.pgm", tmp_path / "o.pgm", "--pad-to-pow2")[0] == 0
    assert read_pgm(tmp_path / "o.pgm").shape == (8, 8)


@pytest.mark.parametrize("args", [["missing.pgm", "o.pgm"], ["in.pgm", "o.pgm", "--quadrant", "sideways"], ["in.pgm", "nodir/o.pgm"]])
def test_fht_input_errors(tmp_path, capsys, monkeypatch, args):
    monkeypatch.chdir(tmp_path)
    write_pgm(tmp_path / "in.pgm", np.ones((4, 4)))
    assert run(capsys, "fht", *args)[0] == 2


def test_fht_corrupt_pgm(tmp_path, capsys):
    (tmp_path / "bad.pgm").write_bytes(b"P5\n4 4\n255\n\x00")
    assert run(capsys, "fht", tmp_path / "bad.pgm", tmp_path / "o.pgm")[0] == 2


# --- verify ---------------------------------------------------------------------------


def test_verify_ok(capsys):
    code, out, _ = run(capsys, "verify", "--p-max", 4)
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 4 and all(r.split()[1:6] == ["ok"] * 5 for r in rows)


def test_verify_injected_fault(capsys):
    code, out, _ = run(capsys, "verify", "--p-max", 3, "--inject-fault")
    assert code == 1 and "T1" in out.splitlines()[-1]


def test_verify_resource_guard(capsys):
    code, _, err = run(capsys, "verify", "--p-max", 9)
    assert code == 2 and "limit" in err


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "verify", "--p-max", "x")[0] == 2


# --- configuration ----------------------------------------------------------------------


def test_parse_config_text():
    cfg = parse_config_text("# comment\n a = 1 \n\nb=x=y  # tail\n")
    assert cfg == {"a": "1", "b": "x=y"}


def test_config_file_and_overrides(tmp_path, capsys):
    (tmp_path / "run.cfg").write_text(f"# synthetic set\nout={tmp_path / 'ds'}\nn_samples=3\nimage_side=16\nseed=1\n")
    assert run(capsys, "synth", "-c", tmp_path / "run.cfg", "n_samples=2")[0] == 0
    assert len(load_dataset(tmp_path / "ds")) == 2


@pytest.mark.parametrize(
    "argv",
    [["synth", "out=x", "colour=red"], ["synth", "-c", "nope.cfg"], ["synth", "garbage"],
     ["train", "data=missing", "model=m.bin"], ["eval", "data=missing", "model=m.bin"], ["synth", "out=o", "orientation=up"]],
)
def test_config_errors(tmp_path, capsys, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert run(capsys, *argv)[0] == 2


def test_thread_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FHTNET_THREADS", "1")
    assert run(capsys, "verify", "--p-max", 1)[0] == 0
    monkeypatch.setenv("FHTNET_THREADS", "many")
    assert run(capsys, "verify", "--p-max", 1)[0] == 2


# --- pipeline -----------------------------------------------------------------------------


def test_synth_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "synth", f"out={tmp_path / name}", "seed=7", "n_samples=4")[0] == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def _train(capsys, dataset, model, *extra):
    return run(capsys, "train", f"data={dataset}", f"model={model}", "filters=2", "batch_size=2", *extra)


def test_untrained_eval_matches(tmp_path, capsys, dataset):
    model = tmp_path / "m.bin"
    assert _train(capsys, dataset, model, "epochs=0", "seed=4")[0] == 0
    assert arch_path(model).is_file()
    code, out, _ = run(capsys, "eval", f"data={dataset}", f"model={model}", "grids=4,8", f"report={tmp_path / 'r.csv'}")
    assert code == 0
    net = load_network(model)
    fresh = Network(net.spec, seed=4)
    ds = load_dataset(dataset)
    expected = evaluate(network_candidates(fresh, ds.images), ds.vps, 8, 32)
    rows = list(csv.DictReader((tmp_path / "r.csv").open()))
    assert list(rows[0]) == ["grid", "k", "rect_side", "error"]
    got = {(r["grid"], r["k"]): float(r["error"]) for r in rows}
    assert got[("8", "1")] == expected.top1_error and got[("8", "5")] == expected.top5_error
    assert len(rows) == 4


def test_train_writes_loss_csv(tmp_path, capsys, dataset):
    model = tmp_path / "m.bin"
    assert _train(capsys, dataset, model, "epochs=2", "loss=heatmap_ce")[0] == 0
    lines = (tmp_path / "m.bin.loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == 3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exit_code(tmp_path, capsys, dataset):
    code, _, err = _train(capsys, dataset, tmp_path / "m.bin", "epochs=3", "learning_rate=1e305", "loss=heatmap")
    assert code == 3 and "diverged" in err


def test_train_bad_range(tmp_path, capsys, dataset):
    assert _train(capsys, dataset, tmp_path / "m.bin", "start=4", "stop=2")[0] == 2


def test_eval_classical(tmp_path, capsys, dataset):
    code, out, _ = run(capsys, "eval", f"data={dataset}", "method=classical", "grids=4")
    assert code == 0 and "top-1" in out
    assert run(capsys, "eval", f"data={dataset}", "method=oracle")[0] == 2


def test_sweep(tmp_path, capsys, dataset):
    model = tmp_path / "m.bin"
    _train(capsys, dataset, model, "epochs=0")
    report = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", f"data={dataset}", f"model={model}", "grids=4,8", "sides=0,4,8", f"report={report}")
    assert code == 0
    rows = list(csv.DictReader(report.open()))
    assert len(rows) == 3 * 2 * 2
    assert report.read_bytes().startswith(b"grid,k,rect_side,error\n")


def test_infer_and_dump(tmp_path, capsys, dataset):
    model = tmp_path / "m.bin"
    _train(capsys, dataset, model, "epochs=0")
    image = dataset / "000000.pgm"
    code, out, _ = run(capsys, "infer", f"model={model}", f"image={image}", "k=3")
    assert code == 0 and len(out.strip().splitlines()) == 3
    dump = tmp_path / "dump"
    code, _, _ = run(capsys, "infer", f"model={model}", f"image={image}", "channels=0,1", "--dump-intermediate", dump)
    assert code == 0
    net = load_network(model)
    expected = sum(min(2, tr.out_shape[0]) for tr in net.spec.trace())
    files = sorted(dump.iterdir())
    assert len(files) == expected
    assert len({f.name.split("_")[0] for f in files}) == len(net.spec.layers)


def test_missing_model(tmp_path, capsys, dataset):
    assert run(capsys, "infer", f"model={tmp_path / 'none.bin'}", f"image={dataset / '000000.pgm'}")[0] == 2
    (tmp_path / "m.bin").write_bytes(b"garbage")
    assert run(capsys, "infer", f"model={tmp_path / 'm.bin'}", f"image={dataset / '000000.pgm'}")[0] == 2
