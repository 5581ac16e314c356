"""Command-line experiment runner.

Every command takes its parameters from an optional JSON file (``--config``)
overridden by ``--set key=value`` pairs, and writes one table as CSV or JSON.
Exit codes: 0 success, 1 a verification row failed, 2 bad input, 3 size cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Callable

import numpy as np

from . import bcs, fluctuations, models, modes
from .core_ops import ContractError, ResourceError, pauli_matrices, random_hermitian

VERIFY_TOL = 1e-10
BOGOLIUBOV_TOL = 1e-10


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ parsing


def _scalar(raw: Any) -> Any:
    if isinstance(raw, str):
        text = raw.strip()
        if text.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            return text
    return raw


def parse_value(raw: Any) -> Any:
    """``"inf"`` -> ``math.inf``, ``"a,b"`` -> list, JSON literals decoded."""
    if isinstance(raw, list):
        return [_scalar(x) for x in raw]
    if isinstance(raw, str) and "," in raw and not raw.strip().startswith("["):
        return [_scalar(x) for x in raw.split(",")]
    value = _scalar(raw)
    if isinstance(value, list):
        return [_scalar(x) for x in value]
    return value


def _float(v) -> float:
    v = _scalar(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}")
    return float(v)


def _int(v) -> int:
    v = _scalar(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"expected an integer, got {v!r}")
    return int(v)


def _bool(v) -> bool:
    v = _scalar(v)
    if not isinstance(v, bool):
        raise ConfigError(f"expected true or false, got {v!r}")
    return v


def _listof(conv: Callable) -> Callable:
    def inner(v):
        v = v if isinstance(v, list) else [v]
        if not v:
            raise ConfigError("empty list")
        return [conv(x) for x in v]

    return inner


def _choice(*options: str) -> Callable:
    def inner(v):
        if v not in options:
            raise ConfigError(f"expected one of {options}, got {v!r}")
        return v

    return inner


FLOATS, INTS = _listof(_float), _listof(_int)

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "gap-sweep": {
        "epsilon": (FLOATS, [0.1, 0.2, 0.3, 0.4]),
        "beta": (FLOATS, [math.inf]),
    },
    "bcs-verify": {
        "epsilon": (FLOATS, [0.4]),
        "beta": (FLOATS, [math.inf]),
    },
    "bcs-dynamics": {
        "epsilon": (_float, 0.4),
        "beta": (_float, math.inf),
        "N": (INTS, [1, 2, 3]),
        "t_max": (_float, 4 * math.pi),
        "t_points": (_int, 129),
        "collective": (_bool, False),
    },
    "clt": {
        "epsilon": (_float, 0.4),
        "beta": (_float, math.inf),
        "n": (INTS, [1, 2, 4, 8, 16, 32]),
        "k": (FLOATS, [0.0, 2 * math.pi / 3]),
        "base": (_choice("hat", "z", "x", "y"), "z"),
        "theta_max": (_float, 3.0),
        "theta_points": (_int, 61),
    },
    "kmode-spectrum": {
        "model": (_choice("heisenberg", "xx"), "heisenberg"),
        "sites": (_int, 6),
        "beta": (_float, 1.0),
        "jx": (_float, 1.0),
        "jy": (_float, 1.0),
        "jz": (_float, 1.0),
        "field": (_float, 0.0),
        "q": (_choice("z", "x", "y"), "z"),
        "k": (FLOATS, None),
    },
    "bogoliubov": {
        "model": (_choice("heisenberg", "xx"), "heisenberg"),
        "sites": (_int, 3),
        "beta": (_float, 1.0),
        "trials": (_int, 100),
    },
    "goldstone-limit": {
        "epsilon_k": (FLOATS, [0.1, 0.01, 0.001]),
        "c_k": (FLOATS, [0.72]),
        "beta": (_float, math.inf),
    },
    "scaling": {
        "delta": (FLOATS, [2.0]),
        "nu": (INTS, [3]),
    },
}


def resolve_params(command: str, config: dict, overrides: list[str]) -> dict:
    schema = SCHEMAS[command]
    raw = dict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"unknown parameters for {command}: {sorted(unknown)}")
    params = {}
    for key, (conv, default) in schema.items():
        if key in raw:
            try:
                params[key] = conv(parse_value(raw[key]))
            except ConfigError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        else:
            params[key] = default
    return params


# ----------------------------------------------------------- commands


class Result:
    def __init__(self, columns: list[str], rows: list[list], ok: bool = True):
        self.columns, self.rows, self.ok = columns, rows, ok


def _chain(params: dict) -> models.HermitianOperator:
    if params["model"] == "xx":
        spec = models.xx_spec(params.get("jx", 1.0), params.get("field", 0.0))
    else:
        spec = models.heisenberg_spec(
            params.get("jx", 1.0), params.get("jy", 1.0), params.get("jz", 1.0), params.get("field", 0.0)
        )
    return models.build_chain_hamiltonian(spec, params["sites"], periodic=True)


def cmd_gap_sweep(params, rng) -> Result:
    rows = []
    for eps in params["epsilon"]:
        for beta in params["beta"]:
            sol = bcs.solve_gap(eps, beta)
            rows.append([eps, beta, abs(sol.lam), sol.mu, sol.residual()])
    return Result(["epsilon", "beta", "lambda_abs", "mu", "residual"], rows)


def _dc_mass(sol: bcs.GapSolution, hat: np.ndarray) -> float:
    """Total ``dc`` weight of ``hat`` under the one-site dynamics; ``rho`` is the Gibbs state of ``h``."""
    H = models.HermitianOperator(sol.h)
    state = models.ground_state(H) if math.isinf(sol.beta) else models.gibbs_state(H, sol.beta)
    mu = fluctuations.liouvillian_spectral_measure(state, hat)
    return fluctuations.dc_measure(mu, sol.beta).total_mass


def _verify_rows(eps: float, beta: float) -> list[tuple[str, float, float]]:
    sol = bcs.solve_gap(eps, beta)
    lam2, mu = abs(sol.lam) ** 2, sol.mu
    hat, e0, j_hat = bcs.symmetry_decompose(sol)
    stats = bcs.goldstone_statistics(sol)
    eye = np.eye(2)
    spec = bcs.superoperator_spectrum(sol)
    comm_h = sol.h @ hat - hat @ sol.h
    rows = [
        ("gap_residual", sol.self_consistency_residual(), 0.0),
        ("hat_square", float(np.abs(hat @ hat - (lam2 / mu**2) * eye).max()), 0.0),
        ("e0_square", float(np.abs(e0 @ e0 - (eps**2 / mu**2) * eye).max()), 0.0),
        ("hat_closed_form", float(np.abs(hat - bcs.hat_sigma_z_closed_form(sol)).max()), 0.0),
        ("j_hat_closed_form", float(np.abs(j_hat - bcs.j_hat_sigma_z_closed_form(sol)).max()), 0.0),
        ("rotation_h_hat", float(np.abs(comm_h + 2j * mu * j_hat).max()), 0.0),
        ("varQ", stats.varQ, lam2 / mu**2),
        ("var_E0", stats.var_E0, (eps / mu) ** 2 * (1 - math.tanh(beta * mu) ** 2)),
        ("commutator_fluct", stats.commutator_fluct, 4 * lam2 / mu),
        ("commutator_QP", stats.commutatorQP, stats.c_lambda),
        ("c_lambda", stats.c_lambda, _dc_mass(sol, hat)),
        ("frequency", stats.frequency, spec.frequency),
        ("virial_residual", stats.virial_residual, 0.0),
        ("occupancy", bcs.occupancy_from_variances(stats), stats.occupancy),
    ]
    return rows


def cmd_bcs_verify(params, rng) -> Result:
    rows, ok = [], True
    for eps in params["epsilon"]:
        for beta in params["beta"]:
            for name, lhs, rhs in _verify_rows(eps, beta):
                err = abs(lhs - rhs)
                passed = err <= VERIFY_TOL
                ok &= passed
                rows.append([eps, beta, name, lhs, rhs, err, passed])
    return Result(["epsilon", "beta", "check_name", "lhs", "rhs", "abs_error", "pass"], rows, ok)


def cmd_bcs_dynamics(params, rng) -> Result:
    sol = bcs.solve_gap(params["epsilon"], params["beta"])
    if params["t_points"] < 1:
        raise ConfigError("t_points must be positive")
    t = np.linspace(0.0, params["t_max"], params["t_points"])
    columns = ["t", "N", "g_N_real", "g_N_imag", "g_limit_real", "g_limit_imag"]
    if params["collective"]:
        columns += ["g_collective_real", "g_collective_imag"]
    rows = []
    for n in params["N"]:
        tab = bcs.finite_size_two_point(sol, n, t)
        for i, ti in enumerate(tab.t):
            row = [ti, n, tab.g_N[i].real, tab.g_N[i].imag, tab.g_limit[i].real, tab.g_limit[i].imag]
            if params["collective"]:
                row += [tab.g_collective[i].real, tab.g_collective[i].imag]
            rows.append(row)
    return Result(columns, rows)


def _site_base(name: str, sol: bcs.GapSolution) -> np.ndarray:
    if name == "hat":
        return bcs.symmetry_decompose(sol)[0]
    return pauli_matrices()[name].op


def cmd_clt(params, rng) -> Result:
    sol = bcs.solve_gap(params["epsilon"], params["beta"])
    base = _site_base(params["base"], sol)
    theta = np.linspace(-params["theta_max"], params["theta_max"], params["theta_points"])
    state = models.product_state(sol.rho, 1)
    rows = []
    for k in params["k"]:
        for n in params["n"]:
            f = fluctuations.make_fluctuation(base, state, n=n, k=k)
            _, k2, k3, k4 = fluctuations.cumulants(state, f, 4)
            gap = fluctuations.characteristic_function(state, f, theta).sup_gap()
            rows.append([n, k, k2, k3, k4, gap])
    return Result(["n", "k", "cumulant2", "cumulant3", "cumulant4", "sup_char_gap"], rows)


def cmd_kmode_spectrum(params, rng) -> Result:
    H = _chain(params)
    state = models.gibbs_state(H, params["beta"])
    q = 0.5 * pauli_matrices()[params["q"]].op
    ks = params["k"] if params["k"] is not None else list(fluctuations.momentum_grid(params["sites"]))
    rows = []
    for k in ks:
        f = fluctuations.fluctuation_matrix(q, state, k=k)
        mu = fluctuations.liouvillian_spectral_measure(state, f)
        dc = fluctuations.dc_measure(mu, params["beta"])
        c_k = fluctuations.susceptibility(state, q, k=k)
        for lam, w in mu.atoms():
            rows.append([k, lam, w, dc.weight_at(lam) if lam > mu.merge_tolerance else 0.0, c_k])
    return Result(["k", "bohr_lambda", "weight", "dc_weight", "c_k_beta"], rows)


def cmd_bogoliubov(params, rng) -> Result:
    H = _chain(params)
    state = models.gibbs_state(H, params["beta"])
    rows, ok = [], True
    for trial in range(params["trials"]):
        a = random_hermitian(H.dim, rng)
        b = random_hermitian(H.dim, rng)
        res = fluctuations.bogoliubov_check(state, a, b)
        ok &= res.slack >= -BOGOLIUBOV_TOL
        rows.append([trial, res.lhs, res.rhs, res.slack])
    return Result(["trial", "lhs", "rhs", "slack"], rows, ok)


def cmd_goldstone_limit(params, rng) -> Result:
    eps = params["epsilon_k"]
    cs = params["c_k"]
    if len(cs) == 1:
        cs = cs * len(eps)
    if len(cs) != len(eps):
        raise ConfigError("c_k must be a scalar or match epsilon_k in length")
    system = modes.limit_system(list(zip(eps, cs)), params["beta"])
    rows = []
    for i, p in enumerate(system.points):
        if system.kind == "quantum_ground":
            comm = p.commutator.imag
        else:
            comm = system.commutator_products[i]
        rows.append([i, p.epsilon_k, p.c_k, p.varQ, p.varP, comm, system.kind])
    return Result(["k_index", "epsilon_k", "c_k", "varQ_check", "varP_check", "commutator", "branch"], rows)


def cmd_scaling(params, rng) -> Result:
    rows = []
    for delta in params["delta"]:
        for nu in params["nu"]:
            d = int(delta) if float(delta).is_integer() else delta
            try:
                sub, ab = modes.scaling_exponents(d, nu)
                rows.append([delta, nu, float(sub), float(ab), True])
            except ContractError:
                rows.append([delta, nu, math.nan, math.nan, False])
    return Result(["delta", "nu", "subnormal_exp", "abnormal_exp", "valid"], rows)


COMMANDS = {
    "gap-sweep": cmd_gap_sweep,
    "bcs-verify": cmd_bcs_verify,
    "bcs-dynamics": cmd_bcs_dynamics,
    "clt": cmd_clt,
    "kmode-spectrum": cmd_kmode_spectrum,
    "bogoliubov": cmd_bogoliubov,
    "goldstone-limit": cmd_goldstone_limit,
    "scaling": cmd_scaling,
}


# ------------------------------------------------------------- output


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(float(v), ".17g")
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v) or math.isnan(v):
            return format_cell(v)
        return v
    return v


def render(command: str, params: dict, result: Result, fmt: str) -> str:
    if fmt == "json":
        doc = {
            "command": command,
            "params": {k: ([_json_cell(x) for x in v] if isinstance(v, list) else _json_cell(v)) for k, v in params.items()},
            "rows": [dict(zip(result.columns, map(_json_cell, r))) for r in result.rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([format_cell(c) for c in row])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goldstone", description=__doc__.splitlines()[0])
    parser.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    parser.add_argument("--config", help="JSON file with a parameter object")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=int, default=0, help="64-bit seed for random suites")
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc.get("params", doc)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.command not in COMMANDS:
        print(f"unknown command {args.command!r}", file=sys.stderr)
        return 2
    if not 0 <= args.seed < 2**64:
        print("seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        params = resolve_params(args.command, _load_config(args.config), args.overrides)
        rng = np.random.Generator(np.random.Philox(args.seed))
        result = COMMANDS[args.command](params, rng)
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ContractError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    text = render(args.command, params, result, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if result.ok else 1


def main() -> None:
    sys.exit(run())
