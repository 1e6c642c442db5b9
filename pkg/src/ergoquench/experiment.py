"""End-to-end quench experiment on a disordered XXX chain.

The protocol: split the chain in half, pick the two product eigenstates of
H_left + H_right whose energies sit closest to the edges of the full
spectrum, and launch either their even superposition ("cat") or their even
classical mixture ("mixed").  Observables are the right-half energy H_R
and the swap operator Q between the two product states.  The run compares
time-window statistics of the evolved expectation values against the
analytic ensemble predictions, with optional Monte-Carlo cross-checks.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, fields

import numpy as np

from .dynamics import (evolve_expectation, make_time_grid, time_stats,
                       write_series_csv)
from .ergodic_ensemble import (DensityMatrix, SHARED_SUPPORT_THRESHOLD,
                               cat_q_variance_closed_form, ensemble_mean,
                               second_moment_expectation)
from .errors import PipelineError, StateValidationError
from .haar_oracle import estimate_moments
from .spectral import (EigenSystem, cluster_sectors, diagonalize,
                       level_spacing_ratio)
from .spin_chain import (DisorderRealization, SpinBasis, build_basis,
                         build_hamiltonian, build_projector_observable,
                         draw_disorder, symmetrized)

PROTOCOLS = ("cat", "mixed")
OBSERVABLE_NAMES = ("H_R", "Q")
DEGENERACY_TOL_RELATIVE = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; JSON keys match field names one to one."""

    L: int = 12
    J: float = 1.0
    h: float = 1.0
    disorder_seed: int = 0
    total_sz: int = 0
    protocol: str = "both"  # "cat", "mixed", or "both"
    time_window: tuple = (3000.0, 13000.0, 20000)
    n_subintervals: int = 10
    degeneracy_tol: float | None = None  # None -> 1e-8 * spectral width
    mc_samples: int = 0
    output_dir: str = "runs"
    prune_floor: float = 1e-14

    def __post_init__(self):
        if self.L < 2 or self.L % 2 != 0:
            raise ValueError(f"L must be even and >= 2 for the half split, got {self.L}")
        if self.protocol not in PROTOCOLS + ("both",):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        t0, t1, n = self.time_window
        if not (t1 > t0):
            raise ValueError(f"time window [{t0}, {t1}] is empty")
        if int(n) < 100:
            raise ValueError(f"need at least 100 time points, got {n}")
        if self.h < 0:
            raise ValueError(f"disorder bound must be >= 0, got {self.h}")
        if self.mc_samples < 0:
            raise ValueError(f"mc_samples must be >= 0, got {self.mc_samples}")
        if self.prune_floor < 0:
            raise ValueError(f"prune_floor must be >= 0, got {self.prune_floor}")
        if self.degeneracy_tol is not None and self.degeneracy_tol < 0:
            raise ValueError("degeneracy_tol must be >= 0 or null")
        object.__setattr__(self, "time_window",
                           (float(t0), float(t1), int(n)))

    @property
    def protocols(self) -> tuple:
        return PROTOCOLS if self.protocol == "both" else (self.protocol,)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "time_window" in raw:
            raw = dict(raw, time_window=tuple(raw["time_window"]))
        return cls(**raw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "L": self.L, "J": self.J, "h": self.h,
            "disorder_seed": self.disorder_seed, "total_sz": self.total_sz,
            "protocol": self.protocol, "time_window": list(self.time_window),
            "n_subintervals": self.n_subintervals,
            "degeneracy_tol": self.degeneracy_tol,
            "mc_samples": self.mc_samples, "output_dir": self.output_dir,
            "prune_floor": self.prune_floor,
        }


@dataclass(frozen=True)
class ProductEigenstate:
    """Eigenstate of H_left + H_right embedded in the full sector basis."""

    vector: np.ndarray
    energy: float
    n_left_up: int
    left_index: int
    right_index: int


@dataclass(frozen=True)
class HalfSpectra:
    """Eigen data of both halves for one left/right magnetization split."""

    n_left_up: int
    basis_left: SpinBasis
    basis_right: SpinBasis
    eig_left: EigenSystem
    eig_right: EigenSystem


def diagonalize_split_halves(length: int, coupling: float,
                             disorder: DisorderRealization,
                             total_sz: int) -> list[HalfSpectra]:
    """Diagonalize both standalone half chains in every compatible pair of
    sub-magnetization sectors."""
    half = length // 2
    n_up = (length + total_sz) // 2
    dis_l = disorder.restrict(0, half - 1)
    dis_r = disorder.restrict(half, length - 1)
    out = []
    for n_left in range(max(0, n_up - half), min(half, n_up) + 1):
        basis_l = build_basis(half, 2 * n_left - half)
        basis_r = build_basis(half, 2 * (n_up - n_left) - half)
        h_l = build_hamiltonian(basis_l, coupling, dis_l)
        h_r = build_hamiltonian(basis_r, coupling, dis_r)
        out.append(HalfSpectra(n_left_up=n_left, basis_left=basis_l,
                               basis_right=basis_r, eig_left=diagonalize(h_l),
                               eig_right=diagonalize(h_r)))
    return out


def find_product_eigenstates(split_spectra: list[HalfSpectra], basis: SpinBasis,
                             target: str,
                             spectrum_bounds: tuple[float, float]) -> ProductEigenstate:
    """Product eigenstate whose energy is closest to one spectral edge.

    target is "near_min" or "near_max"; the scan is exhaustive over all
    sector-compatible (left, right) eigenpairs.  Ties break toward the
    smaller left magnetization, then smaller left index, then right index.
    """
    if target not in ("near_min", "near_max"):
        raise ValueError(f"target must be near_min or near_max, got {target!r}")
    goal = spectrum_bounds[0] if target == "near_min" else spectrum_bounds[1]
    best = None
    for rank, hs in enumerate(split_spectra):
        table = np.abs(hs.eig_left.energies[:, None]
                       + hs.eig_right.energies[None, :] - goal)
        flat = int(np.argmin(table))  # first minimum, row-major: ties resolved
        a, b = divmod(flat, table.shape[1])
        cand = (float(table[a, b]), rank, a, b)
        if best is None or cand < best:
            best = cand
    _, rank, a, b = best
    hs = split_spectra[rank]
    energy = float(hs.eig_left.energies[a] + hs.eig_right.energies[b])
    vector = _embed_product(hs, a, b, basis)
    return ProductEigenstate(vector=vector, energy=energy,
                             n_left_up=hs.n_left_up, left_index=a, right_index=b)


def _embed_product(hs: HalfSpectra, a: int, b: int, basis: SpinBasis) -> np.ndarray:
    half = hs.basis_left.n_sites
    configs = (hs.basis_left.states[:, None]
               | (hs.basis_right.states[None, :] << half)).ravel()
    amps = np.outer(hs.eig_left.vectors[:, a], hs.eig_right.vectors[:, b]).ravel()
    idx = np.searchsorted(basis.states, configs)
    if np.any(basis.states[idx] != configs):
        raise PipelineError("build", "product state fell outside the target sector")
    out = np.zeros(basis.dim, dtype=np.complex128)
    out[idx] = amps
    return out


def prepare_protocol_state(phi1: np.ndarray, phi2: np.ndarray,
                           protocol: str) -> DensityMatrix:
    """Initial state of a protocol: even superposition ("cat") or even
    mixture ("mixed") of two unit vectors."""
    v1 = np.asarray(phi1, dtype=np.complex128).ravel()
    v2 = np.asarray(phi2, dtype=np.complex128).ravel()
    for v in (v1, v2):
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise StateValidationError("protocol inputs must be unit vectors")
    if protocol == "cat":
        s = v1 + v2
        norm = np.linalg.norm(s)
        if norm < 1e-8:
            raise StateValidationError(
                "phi1 + phi2 vanishes; the superposition state is degenerate")
        return DensityMatrix.from_state_vector(s / norm)
    if protocol == "mixed":
        return DensityMatrix(0.5 * (np.outer(v1, v1.conj()) + np.outer(v2, v2.conj())))
    raise ValueError(f"unknown protocol {protocol!r}")


@dataclass
class ExperimentReport:
    config: dict
    spectral: dict
    states: dict
    protocols: dict
    closed_form: dict
    timestamp: str = ""
    runtime_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "config": self.config, "spectral": self.spectral,
            "states": self.states, "protocols": self.protocols,
            "closed_form": self.closed_form, "timestamp": self.timestamp,
            "runtime_seconds": self.runtime_seconds,
        }


@dataclass
class ExperimentResult:
    """Report plus the raw artifacts the writers serialize."""

    report: ExperimentReport
    series: dict  # (protocol, observable) -> TimeSeries
    energies: np.ndarray
    overlaps: np.ndarray  # columns: |<i|phi1>|, |<i|phi2>|


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute the full pipeline for one disorder realization."""
    t_begin = time.perf_counter()
    stage = "build"
    try:
        basis = build_basis(config.L, config.total_sz)
        disorder = draw_disorder(config.L, config.h, config.disorder_seed)
        half = config.L // 2
        ham = build_hamiltonian(basis, config.J, disorder)
        ham_right = build_hamiltonian(basis, config.J, disorder,
                                      bond_range=(half, config.L - 2),
                                      field_sites=(half, config.L - 1))

        stage = "diagonalize"
        eig = diagonalize(ham)
        energies = eig.energies
        e_min, e_max = float(energies[0]), float(energies[-1])
        width = e_max - e_min
        tol = (config.degeneracy_tol if config.degeneracy_tol is not None
               else DEGENERACY_TOL_RELATIVE * width)
        partition = cluster_sectors(energies, tol)
        r_mean = level_spacing_ratio(energies)

        splits = diagonalize_split_halves(config.L, config.J, disorder,
                                          config.total_sz)
        bounds = (e_min, e_max)
        prod1 = find_product_eigenstates(splits, basis, "near_min", bounds)
        prod2 = find_product_eigenstates(splits, basis, "near_max", bounds)

        phi1 = eig.vector_to_eigenbasis(prod1.vector)
        phi2 = eig.vector_to_eigenbasis(prod2.vector)
        h_r_eig = symmetrized(eig.to_eigenbasis(ham_right.entries))
        q_eig = build_projector_observable(phi1, phi2)
        observables = {"H_R": h_r_eig, "Q": q_eig}

        shared = np.abs(phi1 * phi2)
        states_info = {
            "e1": prod1.energy, "e2": prod2.energy,
            "overlap_max": float(shared.max()),
            "overlap_sum": float(shared.sum()),
            "product_inner": float(abs(np.vdot(prod1.vector, prod2.vector))),
        }

        stage = "evolve"
        t0, t1, n_points = config.time_window
        grid = make_time_grid(t0, t1, n_points)
        series: dict = {}
        protocols_out: dict = {}
        for protocol in config.protocols:
            rho0 = prepare_protocol_state(phi1, phi2, protocol)
            mean_state = ensemble_mean(rho0, partition)
            block: dict = {}
            for name, obs in observables.items():
                prediction = second_moment_expectation(rho0, partition, obs, obs)
                ts = evolve_expectation(rho0, obs, energies, grid,
                                        prune_floor=config.prune_floor)
                stats = time_stats(ts, config.n_subintervals)
                series[(protocol, name)] = ts
                entry = {
                    "theory_mean": float(np.einsum(
                        "ij,ji->", mean_state.entries, obs.entries).real),
                    "theory_sigma": float(np.sqrt(max(prediction.connected, 0.0))),
                    "numeric_mean": stats.mean,
                    "numeric_mean_ci": stats.mean_ci,
                    "numeric_sigma": stats.sigma,
                    "numeric_sigma_ci": stats.sigma_ci,
                }
                if config.mc_samples > 0:
                    est1 = estimate_moments(rho0, partition, [obs], order=1,
                                            n_samples=config.mc_samples,
                                            seed=config.disorder_seed)[0]
                    est2 = estimate_moments(rho0, partition, [obs, obs], order=2,
                                            n_samples=config.mc_samples,
                                            seed=config.disorder_seed)[0]
                    entry["mc"] = {
                        "mean": est1.value, "mean_se": est1.std_error,
                        "second_moment": est2.value,
                        "second_moment_se": est2.std_error,
                        "n_samples": config.mc_samples,
                    }
                block[name] = entry
            protocols_out[protocol] = block

        stage = "report"
        closed: dict = {
            "applicable": states_info["overlap_sum"] <= SHARED_SUPPORT_THRESHOLD,
            "threshold": SHARED_SUPPORT_THRESHOLD,
            "overlap_sum": states_info["overlap_sum"],
        }
        if closed["applicable"]:
            variance = cat_q_variance_closed_form(phi1, phi2)
            closed["sigma_q"] = float(np.sqrt(variance))

        report = ExperimentReport(
            config=dict(config.to_dict(), degeneracy_tol=tol),
            spectral={"dim": basis.dim, "e_min": e_min, "e_max": e_max,
                      "r_mean": r_mean, "n_sectors": partition.n_sectors},
            states=states_info,
            protocols=protocols_out,
            closed_form=closed,
            runtime_seconds=round(time.perf_counter() - t_begin, 3),
        )
        overlaps = np.column_stack([np.abs(phi1), np.abs(phi2)])
        return ExperimentResult(report=report, series=series,
                                energies=energies, overlaps=overlaps)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, str(exc)) from exc


def write_artifacts(result: ExperimentResult, out_dir) -> list[str]:
    """Write report.json, per-series CSVs, spectrum.csv, and overlaps.csv.

    On any failure every file written so far is removed, so an output
    directory never holds a partial result set.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []
    try:
        report = result.report
        report.timestamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        # every path is registered before its file is opened, so a failure
        # mid-write still gets that partial file removed below
        path = os.path.join(out_dir, "report.json")
        written.append(path)
        with open(path, "w") as f:
            # allow_nan=False turns any non-finite value into a hard error here
            json.dump(report.as_dict(), f, indent=2, sort_keys=True,
                      allow_nan=False)
            f.write("\n")

        for (protocol, name), ts in result.series.items():
            path = os.path.join(out_dir, f"series_{protocol}_{name}.csv")
            written.append(path)
            write_series_csv(path, ts)

        path = os.path.join(out_dir, "spectrum.csv")
        written.append(path)
        with open(path, "w") as f:
            f.write("index,energy\n")
            for i, e in enumerate(result.energies):
                f.write(f"{i},{float(e):.17g}\n")

        path = os.path.join(out_dir, "overlaps.csv")
        written.append(path)
        with open(path, "w") as f:
            f.write("index,energy,abs_phi1,abs_phi2,shared_support\n")
            for i, e in enumerate(result.energies):
                a1, a2 = result.overlaps[i]
                f.write(f"{i},{float(e):.17g},{a1:.17g},{a2:.17g},{a1 * a2:.17g}\n")
        return written
    except Exception as exc:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise PipelineError("report", f"failed writing artifacts: {exc}") from exc
