import numpy as np
import pytest

from splitsolve.config import (
    ConfigError,
    build_problem,
    parse_config,
    serialize_config,
)

BASIC = """
[problem]
dim_primal = 3
seed = 5
z = const 0.5
f = l1 weight=0.25
h = sq_l2 weight=2.0 center=(1.0,2.0,3.0)

[block]
dim = 2
omega = 1.0
L = diff1d
g = l1 weight=0.4
ell = dirac
r = literal 0.1 -0.2

[steps]
mode = manual
tau = 0.3
sigma = 0.6
lambda = 0.9

[errors]
kind = geometric
amplitude = 0.05
decay = 0.8

[stop]
tol = 1e-9
max_iter = 500
kkt_tol = 1e-7
"""


class TestParsing:
    def test_round_trip_identity(self):
        pc = parse_config(BASIC)
        again = parse_config(serialize_config(pc))
        assert pc == again

    def test_fields(self):
        pc = parse_config(BASIC)
        assert pc.dim_primal == 3
        assert pc.seed == 5
        assert pc.f.kind == "l1"
        assert pc.blocks[0].r.values == (0.1, -0.2)
        assert pc.steps.tau == 0.3
        assert pc.steps.sigmas == (0.6,)
        assert pc.errors.kind == "geometric"
        assert pc.stop.kkt_tol == 1e-7

    def test_unknown_key_rejected_with_line(self):
        text = BASIC.replace("seed = 5", "sneed = 5")
        with pytest.raises(ConfigError, match="unknown key 'sneed'") as exc:
            parse_config(text)
        assert exc.value.line == 4

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match=r"unknown section \[extra\]"):
            parse_config(BASIC + "\n[extra]\nx = 1\n")

    def test_duplicate_key_rejected(self):
        text = BASIC.replace("seed = 5", "seed = 5\nseed = 6")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(text)

    def test_missing_required_key(self):
        text = BASIC.replace("dim_primal = 3\n", "")
        with pytest.raises(ConfigError, match="dim_primal"):
            parse_config(text)

    def test_manual_mode_needs_steps(self):
        text = BASIC.replace("tau = 0.3\n", "")
        with pytest.raises(ConfigError, match="tau"):
            parse_config(text)

    def test_key_before_section(self):
        with pytest.raises(ConfigError, match="before any section"):
            parse_config("x = 1\n[problem]\n")

    def test_malformed_number(self):
        text = BASIC.replace("tau = 0.3", "tau = fast")
        with pytest.raises(ConfigError, match="expected a number"):
            parse_config(text)

    def test_comments_and_blank_lines_ignored(self):
        text = "# leading comment\n\n" + BASIC.replace(
            "tau = 0.3", "tau = 0.3  # inline note")
        assert parse_config(text).steps.tau == 0.3

    def test_sigma_broadcast_to_blocks(self):
        two_block = BASIC.replace(
            "[steps]",
            "[block]\ndim = 3\nomega = 0.5\nL = identity\n"
            "g = zero\nell = dirac\n\n[steps]",
        ).replace("omega = 1.0", "omega = 0.5", 1)
        pc = parse_config(two_block)
        assert pc.steps.sigmas == (0.6, 0.6)


class TestBuild:
    def test_basic_build(self):
        cp, opts = build_problem(parse_config(BASIC))
        assert cp.layout.dim_primal == 3
        assert cp.layout.dual_dims == (2,)
        np.testing.assert_array_equal(cp.z, np.full(3, 0.5))
        assert cp.h.lipschitz_inv == pytest.approx(0.5)  # weight 2 quadratic
        assert opts.seed == 5
        assert opts.stop.max_iter == 500

    def test_weights_must_sum(self):
        text = BASIC.replace("omega = 1.0", "omega = 0.8")
        with pytest.raises(ConfigError, match="sum to 1"):
            build_problem(parse_config(text))

    def test_vector_length_mismatch(self):
        text = BASIC.replace("r = literal 0.1 -0.2", "r = literal 0.1 0.2 0.3")
        with pytest.raises(ConfigError, match="entries"):
            build_problem(parse_config(text))

    def test_stencil_dimension_checks(self):
        text = BASIC.replace("dim = 2", "dim = 3")
        with pytest.raises(ConfigError, match="diff1d"):
            build_problem(parse_config(text))

    def test_matrix_operator(self):
        text = BASIC.replace("L = diff1d", "L = matrix 1 0 0 ; 0 1 1")
        cp, _ = build_problem(parse_config(text))
        np.testing.assert_array_equal(
            cp.blocks[0].L.apply(np.array([1.0, 2.0, 3.0])), [1.0, 5.0])

    def test_matrix_shape_mismatch(self):
        text = BASIC.replace("L = diff1d", "L = matrix 1 0 ; 0 1")
        with pytest.raises(ConfigError, match="matrix shape"):
            build_problem(parse_config(text))

    def test_grad2d_stencil(self):
        text = """
[problem]
dim_primal = 6
f = zero
h = sq_l2 weight=1.0 center=0.0

[block]
dim = 7
omega = 1.0
L = grad2d rows=2 cols=3
g = l2 weight=1.0
ell = dirac

[steps]
mode = auto
"""
        cp, _ = build_problem(parse_config(text))
        assert cp.blocks[0].L.out_dim == 7  # (2-1)*3 + 2*(3-1)

    def test_mu_override_reaches_smooth_term(self):
        text = BASIC.replace("h = sq_l2 weight=2.0 center=(1.0,2.0,3.0)",
                             "h = sq_l2 weight=2.0 center=(1.0,2.0,3.0)\nmu = 3.0")
        cp, _ = build_problem(parse_config(text))
        assert cp.h.lipschitz_inv == 3.0

    def test_seed_override_argument(self):
        cp, opts = build_problem(parse_config(BASIC), seed=42)
        assert opts.seed == 42

    def test_unknown_catalog_function(self):
        text = BASIC.replace("f = l1 weight=0.25", "f = entropy")
        with pytest.raises(ConfigError, match="unknown catalog"):
            build_problem(parse_config(text))
