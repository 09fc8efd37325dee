"""Command line driver: ``nlsbirkhoff <subcommand> --config PATH --out DIR``.

Every run writes its artifacts plus ``manifest.json`` with the resolved
configuration, its hash, package versions, the git reference when available,
timings and a results list.  Apart from timing fields the artifacts depend
only on the configuration and the seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import subprocess
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name

SUBCOMMANDS = ("spectrum", "psi", "normalize", "dynamics", "certify-weights", "accept")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved run configuration; every field has an embedded default."""

    J: int = 2
    J_op: int | None = None
    N: int = 5
    p: float = 2.0
    weights: dict = field(default_factory=lambda: {
        "u": {"family": "unit"},
        "v": {"family": "polynomial", "s": 1.0},
        "w": {"family": "shifted", "s": 1.0, "offset": 1.0},
    })
    rho: list = field(default_factory=lambda: [1e-2])
    Q: int = 64
    dt: float = 1e-3
    T: float = 20.0
    seed: int = 0
    out: str = "out"
    state: str = "random"
    samples: int = 20
    scheme: str = "lawson"
    stride: int = 100
    psi_file: str | None = None
    psi_tilde_file: str | None = None
    cases: list = field(default_factory=lambda: [
        {"case": "i", "s": 1.0, "a": 0.0}, {"case": "ii", "s": 1.0, "a": 0.0},
        {"case": "iii", "s": 1.0, "a": 0.0}])
    n_set: list = field(default_factory=lambda: [3, 5])
    K_max: int = 50
    j_max: int = 30
    criteria: list | None = None
    cache_dir: str | None = None

    def validate(self) -> None:
        if self.J < 0:
            raise ConfigError("J must be non-negative")
        if self.J_op is not None and self.J_op < self.J:
            raise ConfigError(f"J_op = {self.J_op} must be >= J = {self.J}")
        if self.N < 1 or self.N % 2 == 0:
            raise ConfigError(f"N = {self.N} must be odd and positive (only odd orders are nonzero)")
        if not 1.0 <= self.p <= 2.0:
            raise ConfigError("p must lie in [1, 2]")
        if any(not 0 < r < 0.125 for r in self.rho):
            raise ConfigError("every rho must lie in (0, 1/8)")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("dt and T must be positive")
        if self.state not in ("random", "zero", "constant"):
            raise ConfigError("state must be one of random, zero, constant")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if isinstance(cfg.rho, (int, float)):
            cfg.rho = [float(cfg.rho)]
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _git_ref() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True,
                             timeout=5, cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _weight(cfg: dict):
    from .seqspace import Weight
    return Weight.from_config(cfg)


def _state(cfg: RunConfig, rho: float, salt: int = 0):
    from .seqspace import TruncState
    if cfg.state == "zero":
        return TruncState.zeros(cfg.J)
    if cfg.state == "constant":
        return TruncState.from_modes(cfg.J, {0: rho}, real=True)
    return TruncState.random_real(cfg.J, rho, np.random.default_rng([cfg.seed, salt]))


# ---------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg: RunConfig, out: Path, jobs: int) -> list:
    from . import zsspectral as zs
    results = []
    for i, rho in enumerate(cfg.rho):
        st = _state(cfg, rho, i)
        sd = zs.spectral_data(st, cfg.J_op, cfg.J, cfg.Q)
        stem = f"spectrum_{i}"
        (out / f"{stem}.csv").write_text(sd.to_csv())
        _write_json(out / f"{stem}.json", {"state": st.to_json(), "spectral_data": sd.to_json()})
        results.append({"rho": rho, "csv": f"{stem}.csv",
                        "max_gap": float(np.max(np.abs(sd.gaps)))})
    return results


def _kernels(cfg: RunConfig, jobs: int) -> dict:
    from .psitaylor import KernelTensor, compute_kernels
    out = {}
    for n in range(3, cfg.N + 1, 2):
        path = Path(cfg.cache_dir) / f"kernels_n{n}_J{cfg.J}.json" if cfg.cache_dir else None
        if path is not None and path.exists():
            out[n] = KernelTensor.from_json(json.loads(path.read_text()))
            continue
        out[n] = compute_kernels(n, cfg.J, Q=cfg.Q, jobs=jobs)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(out[n].to_json()))
    return out


def cmd_psi(cfg: RunConfig, out: Path, jobs: int) -> list:
    from . import psitaylor as pt
    ks = _kernels(cfg, jobs)
    psi = pt.assemble_psi(cfg.J, cfg.N, ks, Q=cfg.Q)
    for n, kt in ks.items():
        _write_json(out / f"kernels_n{n}.json", kt.to_json())
    _write_json(out / "psi.json", psi.to_json())
    inv = pt.verify_involution(psi, 4)
    results = [{"artifact": "psi.json", "involution_through_4": inv["max_through_degree"],
                "involution_per_degree": {str(k): v for k, v in inv["per_degree"].items()}}]
    for n, kt in ks.items():
        results.append({"kernel_bound": {k: v for k, v in pt.check_kernel_bound(kt).items()}})
    for i, rho in enumerate(cfg.rho):
        rep = pt.verify_gap_identity(psi, rho, cfg.samples, np.random.default_rng([cfg.seed, i]),
                                     cfg.J_op)
        rep.pop("c_values")
        results.append({"gap_identity": rep})
    return results


def _load_map(path: str, cap: int | None = None):
    from .polymap import PolyMap
    return PolyMap.from_json(json.loads(Path(path).read_text()), cap)


def cmd_normalize(cfg: RunConfig, out: Path, jobs: int) -> list:
    from . import kpnormalize as kp
    from . import psitaylor as pt
    if cfg.psi_file:
        psi = _load_map(cfg.psi_file, 2 * cfg.N)
    else:
        psi = pt.assemble_psi(cfg.J, cfg.N, _kernels(cfg, jobs), Q=cfg.Q)
    res = kp.birkhoff_map(psi, cfg.N, rho=cfg.rho[0], solvability_tol=None)
    summary = res.to_json()
    summary.pop("timings")
    _write_json(out / "normal_form.json", summary)
    _write_json(out / "psi_tilde.json", res.Psi_tilde.to_json())
    return [{"artifact": "normal_form.json", "map": "psi_tilde.json", "defects": res.defects,
             "timings": res.timings}]


def cmd_dynamics(cfg: RunConfig, out: Path, jobs: int) -> list:
    from . import dynamics as dyn
    from .seqspace import NormSpec
    Pt = _load_map(cfg.psi_tilde_file) if cfg.psi_tilde_file else None
    spec = NormSpec(cfg.p, _weight(cfg.weights["u"]))
    results = []
    for i, rho in enumerate(cfg.rho):
        st = _state(cfg, rho, i)
        tr = dyn.integrate(st, cfg.T, cfg.dt, cfg.scheme, cfg.stride, Pt, spec=spec)
        stem = f"trajectory_{i}"
        tr.to_csv(out / f"{stem}.csv")
        np.savetxt(out / f"{stem}_drift.dat", tr.drift_table(),
                   header="t |H-H0| |mass-mass0| |P-P0|")
        row = {"rho": rho, "csv": f"{stem}.csv", "energy_drift": tr.energy_drift(),
               "mass_drift": tr.mass_drift(), "momentum_drift": tr.momentum_drift(),
               "norm_bound": dyn.norm_bound_check(tr, cfg.p)}
        if Pt is not None:
            row["action_drift"] = dyn.action_drift(tr).tolist()
        results.append(row)
    return results


def cmd_certify(cfg: RunConfig, out: Path, jobs: int) -> list:
    from . import weightcert as wc
    results = []
    for c in cfg.cases:
        rep = wc.certify_case(c["case"], c.get("s", 0.0), c.get("a", 0.0), c.get("b", 1.0),
                              p=cfg.p, n_set=tuple(cfg.n_set), K_max=cfg.K_max, j_max=cfg.j_max)
        results.append({"case": c, **rep.to_json()})
    _write_json(out / "weights.json", results)
    return results


def cmd_accept(cfg: RunConfig, out: Path, jobs: int) -> list:
    from . import acceptance as acc
    ctx = acc.Context(cfg.cache_dir or out / "cache", cfg.seed, jobs)
    rows = acc.run_all(ctx, cfg.criteria, echo=lambda s: print(s, flush=True))
    table = [r.to_json() for r in rows]
    _write_json(out / "acceptance.json", table)
    with open(out / "acceptance.txt", "w") as fh:
        for r in rows:
            fh.write(r.line() + "\n")
    return table


COMMANDS = {"spectrum": cmd_spectrum, "psi": cmd_psi, "normalize": cmd_normalize,
            "dynamics": cmd_dynamics, "certify-weights": cmd_certify, "accept": cmd_accept}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlsbirkhoff",
                                 description="Birkhoff coordinates for the truncated cubic NLS")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="JSON configuration file")
    ap.add_argument("--out", type=Path, help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads for kernel sweeps")
    return ap


def _fail(msg: str, code: int = 2) -> int:
    print(json.dumps({"status": "error", "error": msg}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data = json.loads(args.config.read_text()) if args.config else {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if args.out is not None:
            data["out"] = str(args.out)
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = RunConfig.from_dict(data)
    except (OSError, json.JSONDecodeError, ConfigError, TypeError) as exc:
        return _fail(f"invalid config: {exc}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        results = COMMANDS[args.subcommand](cfg, out, max(1, args.jobs))
    except (ValueError, ArithmeticError) as exc:
        return _fail(f"{args.subcommand} failed: {exc}", 1)
    wall = time.perf_counter() - t0
    manifest = {
        "subcommand": args.subcommand,
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "git-ref": _git_ref(),
        "versions": {"nlsbirkhoff": __version__, "numpy": np.__version__,
                     "python": platform.python_version(), "backend": backend_name()},
        "wall_time": wall,
        "results": results,
    }
    from .acceptance import _jsonable
    _write_json(out / "manifest.json", _jsonable(manifest))
    if args.subcommand == "accept":
        return 0 if all(r["passed"] for r in results) else 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
