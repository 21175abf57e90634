import numpy as np
import pytest

import sqzgan


def test_equivalence_default_config():
    rep = sqzgan.verify_equivalence("resolution=8\nprecision=f64\n", trials=5)
    assert rep["passed"]
    assert rep["max_deviation"] <= 1e-12
    assert len(rep["deviations"]) == 5


def test_equivalence_rejects_squeeze():
    with pytest.raises(ValueError):
        sqzgan.verify_equivalence("variant=squeeze\n", trials=1)


def test_parameter_accounting():
    nominal = "resolution=256\nchannel_map=nominal256\nstyle_dim=512\nmapping_depth=8\n"
    assert sqzgan.concat_dimension(nominal) == 2496
    base = sqzgan.count_params(nominal)
    squeeze = sqzgan.count_params(nominal + "variant=squeeze\nr=8\n")
    assert abs(base["total"] / 24.80e6 - 1) <= 0.05
    assert abs(100 * (1 - squeeze["total"] / base["total"]) - 12.1) <= 3
    assert sqzgan.block_kernels("skip", 512) == 18 * 512**2
    assert sqzgan.block_kernels("squeeze", 512, 8) == 11 * 512**2 + 18 * 512**2 // 8
    assert sqzgan.published_block_formula("squeeze", 512, 8) == 3211264
    assert sqzgan.published_block_formula("squeeze_no_fbp", 512, 8) is None


def test_metrics():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 4))
    assert abs(sqzgan.frechet_distance(x, x)) <= 1e-9
    assert sqzgan.frechet_distance(np.array([[0.0], [2.0]]), np.array([[2.0], [6.0]])) == pytest.approx(11)
    assert sqzgan.inception_score(np.eye(10)) == pytest.approx(10)
    with pytest.raises(ValueError):
        sqzgan.inception_score(np.array([[0.5, 0.6]]))


def test_pixel_bytes():
    assert [sqzgan.pixel_byte(v) for v in (-1.0, 0.0, 1.0)] == [0, 128, 255]


def test_cli_train_and_generate(tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("resolution=8\nvariant=squeeze\nsteps=2\nbatch=2\n")
    code, out, err = sqzgan.run_cli(["train", str(cfg), "--out", str(tmp_path / "run")])
    assert code == 0, err
    ckpt = str(tmp_path / "run" / "checkpoint.sqzg")
    a = sqzgan.generate(ckpt, count=3, seed=1)
    b = sqzgan.generate(ckpt, count=3, seed=1)
    assert a.shape == (3, 3, 8, 8)
    assert np.isfinite(a).all()
    assert np.array_equal(a, b)
    assert sqzgan.run_cli(["gradcheck", "--suite", "bogus"])[0] == 2
