import pytest
from hypothesis import given, settings, strategies as st

from postsde.config import ExperimentConfig, dumps, load, loads
from postsde.errors import ConfigError
from postsde.schemes import PostKind

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6)


@settings(max_examples=60, deadline=None)
@given(problem=st.sampled_from(["ou", "linear2d", "spring"]),
       epsilon=st.one_of(st.none(), st.floats(1e-8, 10)),
       scheme=st.sampled_from(["euler", "theta1_stab", "theta_std(0.75)"]),
       a=st.one_of(st.none(), finite), c=st.one_of(st.none(), st.floats(0, 5)),
       h_list=st.lists(st.floats(1e-6, 10), min_size=1, max_size=6).map(tuple),
       T=st.floats(1, 1e7), M=st.integers(1, 100), seed=st.integers(0, 2**31),
       workers=st.one_of(st.none(), st.integers(1, 64)),
       estimator=st.sampled_from(["time", "ensemble"]))
def test_round_trip(problem, epsilon, scheme, a, c, h_list, T, M, seed, workers, estimator):
    cfg = ExperimentConfig(problem=problem, epsilon=epsilon, scheme=scheme, a=a, c=c, h_list=h_list, T=T, M=M,
                           seed=seed, workers=workers, estimator=estimator)
    assert loads(dumps(cfg)) == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        loads("[experiment]\nproblem = ou\nstepsize = 0.1\n")


@pytest.mark.parametrize("text", [
    "[other]\nproblem = ou\n",
    "[experiment]\nM = ten\n",
    "[experiment]\nestimator = median\n",
    "[experiment]\nh_list = 0.1 -0.2\n",
    "[experiment]\nscheme = rk4\n",
    "[experiment]\nnewton.jacobian_refresh = sometimes\n",
    "not an ini file",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        loads(text)


def test_explicit_coefficients_override_preset(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[experiment]\nscheme = implicit_euler\na = 0.25\npost = noise_shift\n"
                    "newton.tolerance = 1e-10\nnewton.jacobian_refresh = once\n")
    cfg = load(path)
    spec = cfg.scheme_spec()
    assert spec.theta == 1.0 and spec.a == 0.25 and spec.post_kind is PostKind.NOISE_SHIFT
    assert cfg.newton().tolerance == 1e-10
