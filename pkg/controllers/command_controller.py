"""
Command handlers for the stein CLI.
Each handler writes its result to the output stream and returns an exit code.
"""
import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, TextIO, Tuple

from models.distribution_spec import DistributionSpec, parse_distribution
from models.opweyl import OperatorPoly, UPoly, parse_param
from services import analytic, steinops
from services import density as density_service
from services import minimality as minimality_service
from services import moments as moments_service
from services import verify as verify_service
from utils.errors import CommandError, SteinError
from utils.formatting import parse_exact_list, parse_grid, to_exact
from utils.performance import PerformanceMonitor

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1


def _flag(flag: str, parse: Callable[[str], Any], text: str) -> Any:
    """Parse a flag value, naming the flag in any error."""
    try:
        return parse(text)
    except CommandError:
        raise
    except SteinError as e:
        raise CommandError(flag, str(e))


class CommandController:
    """
    Dispatches parsed arguments to the service layer.
    """

    def __init__(self, out: Optional[TextIO] = None, stdin: Optional[TextIO] = None,
                 perf_monitor: Optional[PerformanceMonitor] = None):
        """
        Args:
            out (TextIO): Result stream (stdout by default)
            stdin (TextIO): Source for "--op -" (stdin by default)
            perf_monitor (PerformanceMonitor): Stage timer
        """
        self.out = out or sys.stdout
        self.stdin = stdin or sys.stdin
        self.perf_monitor = perf_monitor or PerformanceMonitor()
        self.handlers: Dict[str, Callable[[argparse.Namespace], int]] = {
            "construct": self.construct,
            "verify": self.verify,
            "moments": self.moments,
            "minimality": self.minimality,
            "charfn": self.charfn,
            "density": self.density,
            "reduce": self.reduce,
        }

    def run(self, args: argparse.Namespace) -> int:
        handler = self.handlers.get(args.command)
        if handler is None:
            raise CommandError("command", f"unknown subcommand {args.command!r}")
        logger.info(f"Running {args.command}")
        with self.perf_monitor.stage(args.command):
            return handler(args)

    def _write(self, text: str):
        self.out.write(text if text.endswith("\n") else text + "\n")

    # Input helpers

    def _distribution(self, text: Optional[str], flag: str = "--dist") -> DistributionSpec:
        if not text:
            raise CommandError(flag, "a distribution is required")
        return _flag(flag, parse_distribution, text)

    def _operator(self, text: str, flag: str = "--op") -> OperatorPoly:
        """Inline JSON, @path to a JSON file, or - for stdin."""
        if text == "-":
            payload = self.stdin.read()
        elif text.startswith("@"):
            try:
                with open(text[1:], "r", encoding="utf-8") as f:
                    payload = f.read()
            except OSError as e:
                raise CommandError(flag, f"cannot read {text[1:]}: {e.strerror}")
        else:
            payload = text
        return _flag(flag, OperatorPoly.from_json, payload)

    def _operator_or_natural(self, args: argparse.Namespace) -> OperatorPoly:
        if getattr(args, "op", None):
            return self._operator(args.op)
        spec = self._distribution(getattr(args, "dist", None))
        return _flag("--dist", steinops.operator_for, spec)

    def _emit_operator(self, op: OperatorPoly, fmt: str):
        if fmt == "latex":
            self._write(op.to_latex())
        elif fmt == "json":
            payload = op.to_dict()
            payload["text"] = op.to_text()
            self._write(json.dumps(payload, separators=(",", ":")))
        else:
            self._write(op.to_text())

    # Handlers

    def construct(self, args: argparse.Namespace) -> int:
        if args.product_iid_linear:
            op = steinops.product_iid_linear(
                _flag("--alpha", to_exact, args.alpha),
                _flag("--beta", to_exact, args.beta),
                _flag("--a", parse_param, args.a),
                _flag("--b", parse_param, args.b),
            )
        elif args.product_iid:
            if args.p is None or args.q is None:
                raise CommandError("--product-iid", "needs both --p and --q coefficient lists")
            op = steinops.product_iid(UPoly(_flag("--p", parse_exact_list, args.p)),
                                      UPoly(_flag("--q", parse_exact_list, args.q)))
        elif args.table_row is not None:
            op = _flag("--table-row", lambda row: steinops.table_operator(
                row, to_exact(args.mu_x), to_exact(args.mu_y), to_exact(args.var_x), to_exact(args.var_y)),
                args.table_row)
        elif args.dist:
            op = _flag("--dist", steinops.operator_for, self._distribution(args.dist))
        else:
            raise CommandError("--dist", "give --dist or one of --product-iid-linear, --product-iid, --table-row")

        if args.sum is not None:
            op = _flag("--sum", lambda n: steinops.sum_transform(steinops.to_linear_form(op), n), args.sum)
        if args.rescale is not None:
            op = _flag("--rescale", lambda c: op.rescale(to_exact(c)), args.rescale)
        if args.primitive:
            op = op.primitive()
        self._emit_operator(op, args.format)
        return EXIT_OK

    def verify(self, args: argparse.Namespace) -> int:
        if args.demo:
            mu_x, mu_y = _flag("--demo", self._pair, args.demo)
            true_report, perturbed_report = verify_service.characterization_demo(mu_x, mu_y, args.max_k)
            if args.format == "json":
                self._write(json.dumps({"true": true_report.to_dict(), "perturbed": perturbed_report.to_dict()},
                                       indent=2))
            else:
                self._write(self._exact_text(true_report))
                self._write(self._exact_text(perturbed_report))
            return EXIT_OK if true_report.passed and not perturbed_report.passed else EXIT_FAILED

        spec = self._distribution(args.dist)
        op = self._operator(args.op) if args.op else _flag("--dist", steinops.operator_for, spec)
        if args.mc:
            sampler = moments_service.Sampler(spec, seed=args.seed)
            with self.perf_monitor.stage("mc_check"):
                report = verify_service.mc_check(op, sampler, n=args.samples, z_threshold=args.z_threshold)
            text = self._mc_text(report)
        else:
            with self.perf_monitor.stage("exact_check"):
                report = verify_service.exact_check(op, moments_service.moments_for(spec), args.max_k)
            text = self._exact_text(report)
        self._write(verify_service.report_to_json(report) if args.format == "json" else text)
        return EXIT_OK if report.passed else EXIT_FAILED

    @staticmethod
    def _pair(text: str) -> Tuple[Any, Any]:
        values = parse_exact_list(text)
        if len(values) != 2:
            raise CommandError("--demo", f"expected two comma separated means, got {text!r}")
        return values[0], values[1]

    @staticmethod
    def _exact_text(report: verify_service.ExactReport) -> str:
        status = "PASS" if report.passed else f"FAIL (first nonzero residual at k={report.first_failure})"
        lines = [f"exact check against {report.target} for k = 0..{report.max_k}: {status}"]
        if not report.passed:
            lines += [f"  k={k}: {r}" for k, r in enumerate(report.residuals) if r != 0]
        return "\n".join(lines)

    @staticmethod
    def _mc_text(report: verify_service.MCReport) -> str:
        lines = [f"monte carlo check on {report.target}, n={report.n}, seed={report.seed}: "
                 f"{'PASS' if report.passed else 'FAIL'}"]
        for r in report.results:
            mark = " *" if abs(r.z) > report.z_threshold else ""
            lines.append(f"  {r.name}: {r.estimate:+.6e} +- {r.std_error:.2e} (z = {r.z:+.2f}){mark}")
        return "\n".join(lines)

    def moments(self, args: argparse.Namespace) -> int:
        if args.op:
            op = self._operator(args.op)
            initial = _flag("--initial", parse_exact_list, args.initial or "1")
            seq = _flag("--initial", lambda values: moments_service.moment_recurrence_solve(op, values), initial)
        else:
            seq = moments_service.moments_for(self._distribution(args.dist))
        if args.count < 1:
            raise CommandError("--count", f"must be positive, got {args.count}")
        values = seq.take(args.count)
        if args.format == "json":
            self._write(json.dumps({"name": seq.name, "moments": [str(v) for v in values]}, indent=2))
        elif args.format == "csv":
            self._write("\n".join(["k,moment"] + [f"{k},{v}" for k, v in enumerate(values)]))
        else:
            self._write("\n".join(f"mu_{k} = {v}" for k, v in enumerate(values)))
        return EXIT_OK

    @staticmethod
    def _shape(text: str) -> minimality_service.ShapeGrid:
        order, sep, degree = text.lower().partition("x")
        try:
            return minimality_service.ShapeGrid(int(order), int(degree))
        except ValueError:
            raise CommandError("--shape", f"expected ORDERxDEGREE such as 2x1, got {text!r}")

    def minimality(self, args: argparse.Namespace) -> int:
        seq = moments_service.moments_for(self._distribution(args.dist))
        K = None
        if args.rows is not None:
            if args.rows < 1:
                raise CommandError("--rows", f"must be positive, got {args.rows}")
            K = args.rows - 1
        if args.shape:
            shape = self._shape(args.shape)
            if K is None:
                K = shape.unknowns - 1
            result = _flag("--rows", lambda k: minimality_service.analyze_shape(seq, shape, k), K)
            payload = {"target": seq.name, "shape": result.to_dict()}
            if args.show_matrix:
                payload["matrix"] = minimality_service.build_matrix(seq, shape, K).to_dict()
        else:
            report = _flag("--rows", lambda k: minimality_service.minimality_scan(
                seq, args.max_order, args.max_degree, k), K)
            payload = report.to_dict()
        if args.format == "text":
            self._write(self._minimality_text(payload))
        else:
            self._write(json.dumps(payload, indent=2))
        return EXIT_OK

    @staticmethod
    def _minimality_text(payload: Dict[str, Any]) -> str:
        shapes = [payload["shape"]] if "shape" in payload else payload["shapes"]
        lines = [f"target: {payload['target']}"]
        for s in shapes:
            det = f", det = {s['determinant']}" if s["determinant"] is not None else ""
            lines.append(f"  order {s['order']}, degree {s['degree']}: {s['rows']} rows, "
                         f"nullity {s['nullity']}{det}")
        if "minimal_shapes" in payload:
            lines.append(f"minimal shapes: {payload['minimal_shapes']}")
        return "\n".join(lines)

    def charfn(self, args: argparse.Namespace) -> int:
        mu_x = _flag("--mu-x", to_exact, args.mu_x)
        mu_y = _flag("--mu-y", to_exact, args.mu_y)
        if args.op or args.dist:
            op = self._operator_or_natural(args)
        else:
            op = steinops.product_normals(mu_x, mu_y, 1, 1)
        ode = _flag("--op" if args.op else "--dist", analytic.charfn_ode, op)

        if args.grid:
            ts = _flag("--grid", parse_grid, args.grid)
            rows = analytic.charfn_residuals(ode, ts, float(mu_x), float(mu_y))
            lines = ["t,re_phi,im_phi,abs_residual"]
            lines += [f"{t:.6f},{phi.real:.12e},{phi.imag:.12e},{res:.3e}" for t, phi, res in rows]
            self._write("\n".join(lines))
        elif args.format == "latex":
            self._write(ode.to_latex())
        elif args.format == "json":
            self._write(json.dumps(ode.to_dict(), indent=2))
        else:
            self._write(ode.to_text())
        return EXIT_OK

    def density(self, args: argparse.Namespace) -> int:
        if args.ode:
            op = self._operator_or_natural(args)
            ode = analytic.dual_density_ode(op)
            if args.normalize:
                ode = ode.normalized()
            if args.format == "latex":
                self._write(ode.to_latex())
            elif args.format == "json":
                self._write(json.dumps(ode.to_dict(), indent=2))
            else:
                self._write(ode.to_text())
            return EXIT_OK

        xs = _flag("--grid", parse_grid, args.grid)
        mu_x = float(_flag("--mu-x", to_exact, args.mu_x))
        mu_y = float(_flag("--mu-y", to_exact, args.mu_y))
        with self.perf_monitor.stage("density_table"):
            rows = density_service.density_table(xs, mu_x, mu_y, args.terms)
        lines = ["x,series,convolution,abs_diff"]
        lines += [f"{x:.6f},{s:.12e},{c:.12e},{d:.3e}" for x, s, c, d in rows]
        self._write("\n".join(lines))
        return EXIT_OK

    def reduce(self, args: argparse.Namespace) -> int:
        if args.a or args.l or args.b:
            if not (args.a and args.l and args.b):
                raise CommandError("--a", "custom reductions need --a, --l and --b")
            reductions = [steinops.Reduction("custom", self._operator(args.a, "--a"), self._operator(args.l, "--l"),
                                             self._operator(args.b, "--b"), args.orientation)]
        else:
            reductions = _flag("--r", lambda r: steinops.standard_reductions(
                r, to_exact(args.sigma), args.n, to_exact(args.mu)), to_exact(args.r))

        results: List[Dict[str, Any]] = []
        for red in reductions:
            holds = _flag("--orientation", lambda o: steinops.reduction_check(red.a, red.l, red.b, o),
                          red.orientation)
            results.append({"name": red.name, "orientation": red.orientation, "holds": holds,
                            "a": red.a.to_text(), "l": red.l.to_text(), "b": red.b.to_text()})
        if args.format == "json":
            self._write(json.dumps(results, indent=2))
        else:
            self._write("\n".join(f"{r['name']} ({r['orientation']}): {'ok' if r['holds'] else 'FAIL'}"
                                  for r in results))
        return EXIT_OK if all(r["holds"] for r in results) else EXIT_FAILED
