import io
import json
import logging

import pytest

import config
from controllers.command_controller import CommandController
from main import build_parser, main
from models.distribution_spec import parse_distribution, to_json
from models.opweyl import D, M, OperatorPoly
from services import steinops
from utils.errors import CommandError

NORMAL_OP = (D - M).to_json()
BESSEL_OP = (M * D ** 2 + D - M).to_json()


@pytest.fixture(autouse=True)
def _restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestConstruct:
    def test_normal(self, capsys):
        code, out, _ = run(capsys, "construct", "--dist", "normal:0,1")
        assert code == 0
        assert out.strip() == "D - M"

    def test_product_iid_linear_json(self, capsys):
        code, out, _ = run(capsys, "construct", "--product-iid-linear", "--alpha", "1", "--beta", "1",
                           "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert OperatorPoly.from_json(payload) == steinops.equal_means_operator(1)
        assert payload["text"] == steinops.equal_means_operator(1).to_text()

    def test_sum(self, capsys):
        code, out, _ = run(capsys, "construct", "--dist", "prodnormal:1,1", "--sum", "3")
        natural = steinops.operator_for(parse_distribution("prodnormal:1,1"))
        expected = steinops.sum_transform(steinops.to_linear_form(natural), 3)
        assert code == 0
        assert out.strip() == expected.to_text()

    def test_table_row(self, capsys):
        code, out, _ = run(capsys, "construct", "--table-row", "2", "--mu-x", "1", "--mu-y", "2",
                           "--var-x", "1", "--var-y", "4")
        assert code == 0
        assert out.strip() == steinops.table_operator(2, 1, 2, 1, 4).to_text()

    def test_rescale_latex(self, capsys):
        code, out, _ = run(capsys, "construct", "--dist", "normal:0,1", "--rescale", "2", "--format", "latex")
        assert code == 0
        assert out.strip() == (D - M).rescale(2).to_latex()

    def test_primitive(self, capsys):
        code, out, _ = run(capsys, "construct", "--product-iid", "--p", "1", "--q", "2", "--primitive")
        assert code == 0
        assert out.strip() == steinops.equal_means_operator(4).primitive().to_text()

    def test_missing_polynomial(self, capsys):
        code, _, err = run(capsys, "construct", "--product-iid", "--p", "1")
        assert code == 2
        assert err.startswith("error: --product-iid:")

    def test_bad_distribution(self, capsys):
        code, _, err = run(capsys, "construct", "--dist", "beta:1,2")
        assert code == 2
        assert "--dist" in err

    def test_nothing_to_build(self, capsys):
        assert run(capsys, "construct")[0] == 2


class TestVerify:
    def test_natural_operator(self, capsys):
        code, out, _ = run(capsys, "verify", "--dist", "prodnormal:1,2", "--max-k", "20")
        assert code == 0
        assert "PASS" in out

    def test_wrong_operator(self, capsys):
        code, out, _ = run(capsys, "verify", "--dist", "normal:1,1", "--op", NORMAL_OP, "--max-k", "5")
        assert code == 1
        assert "first nonzero residual at k=0" in out

    def test_json(self, capsys):
        code, out, _ = run(capsys, "verify", "--dist", "prodnormal:1,1", "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert payload["pass"] is True
        assert payload["kind"] == "exact"

    def test_operator_from_stdin(self, capsys, monkeypatch):
        monkeypatch.setattr("sys.stdin", io.StringIO(BESSEL_OP))
        code, _, _ = run(capsys, "verify", "--dist", "prodnormal:0,0", "--op", "-")
        assert code == 0

    def test_operator_from_file(self, capsys, tmp_path):
        path = tmp_path / "op.json"
        path.write_text(NORMAL_OP, encoding="utf-8")
        assert run(capsys, "verify", "--dist", "normal:0,1", "--op", f"@{path}")[0] == 0

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "verify", "--dist", "normal:0,1", "--op", f"@{tmp_path / 'nope.json'}")
        assert code == 2
        assert "--op" in err

    def test_malformed_operator(self, capsys):
        code, _, err = run(capsys, "verify", "--dist", "normal:0,1", "--op", '{"terms": 3}')
        assert code == 2
        assert err.startswith("error: --op:")

    def test_demo(self, capsys):
        code, out, _ = run(capsys, "verify", "--demo", "1,2", "--max-k", "8")
        assert code == 0
        assert "PASS" in out
        assert "k=3" in out

    def test_demo_needs_two_means(self, capsys):
        assert run(capsys, "verify", "--demo", "1")[0] == 2

    def test_monte_carlo(self, capsys):
        code, out, _ = run(capsys, "--seed", "3", "verify", "--dist", "normal:0,1", "--mc", "--samples", "20000",
                           "--z-threshold", "6")
        assert code == 0
        assert "seed=3" in out
        assert out.count("exp(-x^2/2)") == 9


class TestMoments:
    def test_distribution_csv(self, capsys):
        code, out, _ = run(capsys, "moments", "--dist", "prodnormal:1,1", "--count", "7", "--format", "csv")
        assert code == 0
        assert out.splitlines() == ["k,moment", "0,1", "1,1", "2,4", "3,16", "4,100", "5,676", "6,5776"]

    def test_recurrence_json(self, capsys):
        code, out, _ = run(capsys, "moments", "--op", NORMAL_OP, "--initial", "1", "--count", "5",
                           "--format", "json")
        assert code == 0
        assert json.loads(out)["moments"] == ["1", "0", "1", "0", "3"]

    def test_text(self, capsys):
        _, out, _ = run(capsys, "moments", "--dist", "normal:2,1", "--count", "3")
        assert out.splitlines() == ["mu_0 = 1", "mu_1 = 2", "mu_2 = 5"]

    def test_insufficient_initial_moments(self, capsys):
        op = steinops.product_normals(1, 2, 1, 1).to_json()
        code, _, err = run(capsys, "moments", "--op", op, "--initial", "1,2")
        assert code == 2
        assert "--initial" in err

    def test_bad_count(self, capsys):
        assert run(capsys, "moments", "--dist", "normal:0,1", "--count", "0")[0] == 2


class TestMinimality:
    def test_square_shape(self, capsys):
        code, out, _ = run(capsys, "minimality", "--dist", "prodnormal:1,1", "--shape", "2x1", "--show-matrix")
        assert code == 0
        payload = json.loads(out)
        assert payload["shape"]["determinant"] == "276480"
        assert payload["shape"]["nullity"] == 0
        assert payload["matrix"]["rows"][2] == ["2", "2", "8", "2", "16", "4"]

    def test_scan(self, capsys):
        code, out, _ = run(capsys, "minimality", "--dist", "prodnormal:0,0", "--max-order", "2",
                           "--max-degree", "1")
        assert code == 0
        assert json.loads(out)["minimal_shapes"] == [[2, 1]]

    def test_text(self, capsys):
        _, out, _ = run(capsys, "minimality", "--dist", "prodnormal:1,1", "--shape", "3x1", "--rows", "9",
                        "--format", "text")
        assert "nullity 1" in out

    @pytest.mark.parametrize("argv", [["--shape", "2y1"], ["--shape", "3x1", "--rows", "4"], ["--rows", "0"]])
    def test_rejects(self, capsys, argv):
        assert run(capsys, "minimality", "--dist", "prodnormal:1,1", *argv)[0] == 2


class TestCharfn:
    def test_default_product(self, capsys):
        code, out, _ = run(capsys, "charfn")
        assert code == 0
        assert out.strip().startswith("(t^4 + 2 t^2 + 1) phi'(t)")

    def test_normal(self, capsys):
        _, out, _ = run(capsys, "charfn", "--dist", "normal:0,1")
        assert out.strip() == "(1) phi'(t) + (t) phi(t) = 0"

    def test_grid(self, capsys):
        code, out, _ = run(capsys, "charfn", "--mu-x", "1", "--mu-y", "2", "--grid", "0:2:5")
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "t,re_phi,im_phi,abs_residual"
        assert len(lines) == 6
        assert all(float(line.split(",")[3]) < 1e-6 for line in lines[1:])

    def test_second_degree_operator(self, capsys):
        op = (M ** 2 * D - M).to_json()
        assert run(capsys, "charfn", "--op", op)[0] == 2


class TestDensity:
    def test_ode(self, capsys):
        code, out, _ = run(capsys, "density", "--ode", "--op", BESSEL_OP)
        assert code == 0
        assert out.strip() == "(x) p''(x) + (1) p'(x) + (-x) p(x) = 0"

    def test_table(self, capsys):
        code, out, _ = run(capsys, "density", "--grid", "1:2:2")
        lines = out.splitlines()
        assert code == 0
        assert lines[0] == "x,series,convolution,abs_diff"
        assert [line.split(",")[0] for line in lines[1:]] == ["1.000000", "2.000000"]

    def test_bad_grid(self, capsys):
        assert run(capsys, "density", "--grid", "1:2")[0] == 2


class TestReduce:
    def test_standard(self, capsys):
        code, out, _ = run(capsys, "reduce")
        lines = out.splitlines()
        assert code == 0
        assert len(lines) == 7
        assert all(line.endswith(": ok") for line in lines)

    def test_custom_failure(self, capsys):
        code, out, _ = run(capsys, "reduce", "--a", BESSEL_OP, "--l", NORMAL_OP, "--b", NORMAL_OP, "--format", "json")
        assert code == 1
        assert json.loads(out)[0]["holds"] is False

    def test_incomplete_custom(self, capsys):
        assert run(capsys, "reduce", "--a", BESSEL_OP)[0] == 2


class TestGlobalFlags:
    def test_show_config(self, capsys):
        code, out, _ = run(capsys, "--show-config")
        assert code == 0
        assert "STEIN_SEED" in out

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main([])

    def test_timings(self, capsys):
        code, _, err = run(capsys, "--timings", "moments", "--dist", "normal:0,1")
        assert code == 0
        assert "stage timings" in err
        assert "moments" in err

    def test_distribution_as_json(self, capsys):
        spec = parse_distribution("sum2:prodnormal:1,2")
        code, out, _ = run(capsys, "construct", "--dist", to_json(spec))
        assert code == 0
        assert out.strip() == steinops.operator_for(spec).to_text()

    def test_workers(self, capsys, monkeypatch):
        monkeypatch.setattr("config.MAX_WORKERS", 4)
        code, _, _ = run(capsys, "--workers", "2", "moments", "--dist", "normal:0,1")
        assert code == 0
        assert config.MAX_WORKERS == 2

    @pytest.mark.parametrize("value", ["0", "-3", "two"])
    def test_workers_must_be_positive(self, capsys, value):
        with pytest.raises(SystemExit) as info:
            main(["--workers", value, "moments", "--dist", "normal:0,1"])
        assert info.value.code == 2
        assert "--workers" in capsys.readouterr().err


class TestController:
    def test_handlers(self):
        controller = CommandController(out=io.StringIO())
        assert set(controller.handlers) == {"construct", "verify", "moments", "minimality", "charfn", "density",
                                            "reduce"}

    def test_dispatch(self):
        out = io.StringIO()
        args = build_parser().parse_args(["verify", "--dist", "normal:0,1", "--max-k", "6"])
        assert CommandController(out=out).run(args) == 0
        assert "PASS" in out.getvalue()

    def test_unknown_command(self):
        args = build_parser().parse_args(["moments", "--dist", "normal:0,1"])
        args.command = "plot"
        with pytest.raises(CommandError):
            CommandController(out=io.StringIO()).run(args)
