"""Ensemble orchestration: declarative experiment configs and runners.

Each runner maps a config onto an ensemble of independent trajectories,
executes them (serially or on a process pool), and reduces the results
in trajectory-index order with a fixed pairwise scheme, so output is
bit-identical for a given (config, seed) regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dynamics import (IntegratorConfig, OpenAccumulators, RngStream,
                       advance_coupled, advance_langevin_coupled, advance_open,
                       advance_dephasing, sample_exciton_initial,
                       sample_initial_lattice, thermalize)
from .model import ModelParams, SystemState, total_energy
from .observables import (ObservableSeries, NonDiffusiveError,
                          SURVIVAL_THRESHOLD, UndefinedObservableError,
                          diffusion_constant, kinetic_temperature,
                          participation_ratio, threshold_time, _tail_estimate)
from .spectral import SpectrumGrid, mode_projection, power_spectrum

__all__ = [
    "DisorderSpec",
    "Phase",
    "ExperimentConfig",
    "RunManifest",
    "config_hash",
    "default_config",
    "run_spreading",
    "run_diffusion_scan",
    "run_threshold_scan",
    "run_spectrum",
    "run_efficiency",
    "run_validate",
    "run_experiment",
    "emit",
]

KINDS = ("spreading", "diffusion-scan", "threshold-scan", "spectrum",
         "efficiency", "dephasing-efficiency", "validate")

# stream ids >= ensemble trajectories never collide with per-trajectory ids
_PILOT_STREAM_OFFSET = 2**32


@dataclass
class DisorderSpec:
    """Static on-site energy disorder, drawn per realization."""

    distribution: str = "uniform"
    low: float = -0.5
    high: float = 0.5

    def __post_init__(self):
        if self.distribution != "uniform":
            raise ValueError("only uniform disorder is supported")
        if not self.low < self.high:
            raise ValueError("disorder interval must satisfy low < high")

    def draw(self, L: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high, L)


@dataclass
class Phase:
    """One protocol phase: thermalize, thermalize-coupled or evolve."""

    name: str
    duration: float

    def __post_init__(self):
        if self.name not in ("thermalize", "thermalize-coupled", "evolve"):
            raise ValueError(f"unknown phase {self.name!r}")
        if self.duration <= 0:
            raise ValueError("phase durations must be positive")


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment."""

    kind: str
    params: ModelParams
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    ensemble_size: int = 16
    seed: int = 0
    exciton_init: str = "delta"
    exciton_site: int | None = None
    protocol: list[Phase] | None = None
    disorder: DisorderSpec | None = None
    outputs: tuple[str, ...] = ()
    # scan grids
    T_grid: tuple[float, ...] | None = None
    coupling_modes: tuple[str, ...] = ("full",)
    chi_grid: tuple[float, ...] | None = None
    pi_threshold: float = 100.0
    saturation_fraction: float = 0.5
    stop_fraction: float | None = None
    samples_per_decade: int = 60
    fixed_exponent: bool = False
    # spectra
    modes: tuple[int, ...] = (1, 2, 4, 8)
    fields: tuple[str, ...] = ("lattice",)
    record_length: float = 2.0**13
    sample_stride: float = 0.1
    # open-system transport
    geometry: str = "ring"
    source_site: int = 0
    survival_threshold: float = SURVIVAL_THRESHOLD
    t_max: float = 1e6
    workers: int = 1
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")
        if self.geometry not in ("ring", "chain"):
            raise ValueError("geometry must be 'ring' or 'chain'")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for md in self.coupling_modes:
            if md not in ("diagonal", "off-diagonal", "full"):
                raise ValueError(f"unknown coupling mode {md!r}")

    # -- serialization ------------------------------------------------

    def to_dict(self) -> dict:
        d = {}
        for f_ in dataclasses.fields(self):
            v = getattr(self, f_.name)
            if f_.name == "params":
                v = _params_to_dict(v)
            elif f_.name == "integrator":
                v = dataclasses.asdict(v)
            elif f_.name == "protocol" and v is not None:
                v = [dataclasses.asdict(ph) for ph in v]
            elif f_.name == "disorder" and v is not None:
                v = dataclasses.asdict(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[f_.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["params"] = _params_from_dict(d["params"])
        d["integrator"] = IntegratorConfig(**d.get("integrator", {}))
        if d.get("protocol") is not None:
            d["protocol"] = [Phase(**ph) for ph in d["protocol"]]
        if d.get("disorder") is not None:
            d["disorder"] = DisorderSpec(**d["disorder"])
        for name in ("outputs", "coupling_modes", "modes", "fields"):
            if name in d and d[name] is not None:
                d[name] = tuple(d[name])
        for name in ("T_grid", "chi_grid"):
            if d.get(name) is not None:
                d[name] = tuple(d[name])
        return cls(**d)


def _params_to_dict(p: ModelParams) -> dict:
    def field_value(arr, default):
        arr = np.asarray(arr)
        if np.all(arr == default):
            return float(default)
        return [float(x) for x in arr]

    return {
        "L": p.L, "M": p.M, "kappa": p.kappa, "beta": p.beta,
        "chi_E": p.chi_E, "chi_J": p.chi_J,
        "E0": field_value(p.E0, 1.0), "J0": field_value(p.J0, 1.0),
        "hbar": p.hbar, "T": p.T, "alpha": p.alpha,
        "gamma_r": p.gamma_r, "Gamma": p.Gamma,
        "sink_index": p.sink_index,
        "bond_mask": (None if np.all(p.bond_mask == 1.0)
                      else [float(x) for x in p.bond_mask]),
    }


def _params_from_dict(d: dict) -> ModelParams:
    return ModelParams(**d)


def config_hash(config: ExperimentConfig) -> str:
    d = config.to_dict()
    d.pop("workers")  # an execution detail, not part of the run identity
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    """Provenance record emitted next to every output table."""

    kind: str
    config: dict
    config_hash: str
    seed: int
    stream_ids: list[int]
    version: str
    outputs: list[str]
    wallclock_start: str = ""
    wallclock_seconds: float = 0.0

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    def reproducible_fields(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("wallclock_start")
        d.pop("wallclock_seconds")
        return d


# ----------------------------------------------------------------------
# Deterministic ensemble plumbing
# ----------------------------------------------------------------------

def _pairwise_sum(arrays: list[np.ndarray]) -> np.ndarray:
    n = len(arrays)
    if n == 1:
        return np.array(arrays[0], dtype=float, copy=True)
    mid = n // 2
    return _pairwise_sum(arrays[:mid]) + _pairwise_sum(arrays[mid:])


def pairwise_mean(arrays: list[np.ndarray]) -> np.ndarray:
    """Index-ordered pairwise average; independent of scheduling order."""
    return _pairwise_sum(arrays) / len(arrays)


def _map_indexed(fn, arg_tuples, workers: int):
    """Map ``fn`` over argument tuples, returning results in index order."""
    if workers <= 1 or len(arg_tuples) <= 1:
        return [fn(*args) for args in arg_tuples]
    import multiprocessing

    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(fn, *args) for args in arg_tuples]
        return [f.result() for f in futures]


def _log_schedule(dt: float, t_end: float, per_decade: int,
                  t_first: float | None = None) -> np.ndarray:
    """Strictly increasing step indices, roughly log-spaced in time."""
    if t_first is None:
        t_first = 10 * dt
    t_first = min(t_first, t_end)
    n_end = max(int(round(t_end / dt)), 1)
    n_first = max(int(round(t_first / dt)), 1)
    if n_first >= n_end:
        return np.array([n_end])
    count = max(int(np.ceil(np.log10(n_end / n_first) * per_decade)), 2)
    steps = np.unique(np.round(np.logspace(
        np.log10(n_first), np.log10(n_end), count)).astype(np.int64))
    return steps


def _thermal_duration(config: ExperimentConfig) -> float:
    for ph in config.protocol or []:
        if ph.name.startswith("thermalize"):
            return ph.duration
    return float(config.params.L)


def _evolve_duration(config: ExperimentConfig, default: float) -> float:
    for ph in config.protocol or []:
        if ph.name == "evolve":
            return ph.duration
    return default


# ----------------------------------------------------------------------
# Spreading
# ----------------------------------------------------------------------

@dataclass
class SpreadingResult:
    pi: ObservableSeries
    kinetic_T: ObservableSeries
    norm: ObservableSeries
    energy: ObservableSeries
    momentum: ObservableSeries
    final_density: np.ndarray
    config: ExperimentConfig


def _spreading_trajectory(config: ExperimentConfig, params: ModelParams,
                          stream_id: int, t_evolve: float,
                          stop_value: float | None):
    dt = config.integrator.dt
    rng = RngStream(config.seed, stream_id).generator()
    lattice = sample_initial_lattice(params, rng)
    thermalize(lattice, params, rng, dt=dt, t0=_thermal_duration(config))
    exciton = sample_exciton_initial(config.exciton_init, params.L, rng,
                                     site=config.exciton_site)
    state = SystemState(lattice, exciton, t=0.0)
    schedule = _log_schedule(dt, t_evolve, config.samples_per_decade)
    n_rec = schedule.size
    times = schedule * dt
    pi = np.empty(n_rec)
    nrm = np.empty(n_rec)
    ene = np.empty(n_rec)
    mom = np.empty(n_rec)
    p_snaps = np.empty((n_rec, params.L))
    prev = 0
    k = 0
    for k, step in enumerate(schedule):
        advance_coupled(state, params, dt, int(step - prev))
        prev = step
        pi[k] = participation_ratio(state.exciton)
        nrm[k] = state.exciton.norm
        ene[k] = total_energy(state, params)
        mom[k] = state.lattice.p.sum()
        p_snaps[k] = state.lattice.p
        if stop_value is not None and pi[k] >= stop_value:
            k += 1
            break
    else:
        k = n_rec
    return {
        "times": times[:k], "pi": pi[:k], "norm": nrm[:k],
        "energy": ene[:k], "momentum": mom[:k], "p_snaps": p_snaps[:k],
        "final_density": state.exciton.density,
    }


def run_spreading(config: ExperimentConfig,
                  params: ModelParams | None = None,
                  t_evolve: float | None = None,
                  stop_value: float | None = None) -> SpreadingResult:
    """Thermalize, switch on the coupling, and average the spreading.

    Per trajectory: sample Maxwell momenta, thermalize for t0 (default
    L time units), disconnect the bath, place the excitation (delta at
    the chain center by default) and evolve microcanonically.  Returns
    ensemble means of the participation ratio, kinetic temperature and
    conservation diagnostics on a log-spaced time grid.
    """
    params = config.params if params is None else params
    t_ev = _evolve_duration(config, 100.0) if t_evolve is None else t_evolve
    if stop_value is None and config.stop_fraction is not None:
        stop_value = config.stop_fraction * (params.L - 1)
    results = _map_indexed(
        _spreading_trajectory,
        [(config, params, i, t_ev, stop_value)
         for i in range(config.ensemble_size)],
        config.workers)
    n_common = min(r["times"].size for r in results)
    times = results[0]["times"][:n_common]
    n_ens = len(results)
    pi_mean = pairwise_mean([r["pi"][:n_common] for r in results])
    nrm_mean = pairwise_mean([r["norm"][:n_common] for r in results])
    ene_mean = pairwise_mean([r["energy"][:n_common] for r in results])
    mom_mean = pairwise_mean([r["momentum"][:n_common] for r in results])
    dens_mean = pairwise_mean([r["final_density"] for r in results])
    if n_ens >= 2:
        stack = np.stack([r["p_snaps"][:n_common] for r in results])
        tk = np.mean(np.var(stack, axis=0, ddof=1), axis=1) / params.M
    else:
        tk = np.full(n_common, np.nan)
    mk = lambda v, lbl: ObservableSeries(times, v, label=lbl, ensemble_size=n_ens)
    return SpreadingResult(
        pi=mk(pi_mean, "participation_ratio"),
        kinetic_T=mk(tk, "kinetic_temperature"),
        norm=mk(nrm_mean, "norm"),
        energy=mk(ene_mean, "energy"),
        momentum=mk(mom_mean, "momentum"),
        final_density=dens_mean,
        config=config)


# ----------------------------------------------------------------------
# Diffusion-constant scan
# ----------------------------------------------------------------------

def _mode_params(params: ModelParams, mode: str) -> ModelParams:
    if mode == "diagonal":
        return params.replace(chi_J=0.0)
    if mode == "off-diagonal":
        return params.replace(chi_E=0.0)
    return params


@dataclass
class DiffusionScanResult:
    rows: list[dict]
    config: ExperimentConfig


def run_diffusion_scan(config: ExperimentConfig,
                       t_evolve: float | None = None) -> DiffusionScanResult:
    """D(T) for each coupling mode (diagonal / off-diagonal / full).

    Each grid point runs a spreading ensemble (with early stop above the
    saturation cap) and fits the asymptotic sqrt(t) window; points with
    no valid window are flagged and the scan continues.
    """
    if not config.T_grid:
        raise ValueError("diffusion-scan needs a T_grid")
    t_ev = _evolve_duration(config, 2000.0) if t_evolve is None else t_evolve
    stop_value = 0.75 * (config.params.L - 1)
    rows = []
    for mode in config.coupling_modes:
        for T in config.T_grid:
            params = _mode_params(config.params, mode).replace(T=float(T))
            spread = run_spreading(config, params=params, t_evolve=t_ev,
                                   stop_value=stop_value)
            row = {"mode": mode, "T": float(T), "D": np.nan,
                   "exponent": np.nan, "residual": np.nan,
                   "window_lo": np.nan, "window_hi": np.nan, "status": "ok"}
            try:
                est = diffusion_constant(
                    spread.pi, config.saturation_fraction,
                    pi_max=params.L - 1.0,
                    fixed_exponent=config.fixed_exponent)
                row.update(D=est.D, exponent=est.fit.exponent,
                           residual=est.fit.residual,
                           window_lo=est.window[0], window_hi=est.window[1])
            except NonDiffusiveError as err:
                row["status"] = f"non-diffusive ({err})"
                if err.fit is not None:
                    row["exponent"] = err.fit.exponent
            rows.append(row)
    return DiffusionScanResult(rows, config)


# ----------------------------------------------------------------------
# Threshold-time scan
# ----------------------------------------------------------------------

def _threshold_trajectory(config: ExperimentConfig, params: ModelParams,
                          stream_id: int, t_max: float, pi_s: float):
    dt = config.integrator.dt
    rng = RngStream(config.seed, stream_id).generator()
    lattice = sample_initial_lattice(params, rng)
    thermalize(lattice, params, rng, dt=dt, t0=_thermal_duration(config))
    exciton = sample_exciton_initial(config.exciton_init, params.L, rng,
                                     site=config.exciton_site)
    state = SystemState(lattice, exciton, t=0.0)
    schedule = _log_schedule(dt, t_max, config.samples_per_decade)
    times = []
    pi = []
    prev = 0
    for step in schedule:
        advance_coupled(state, params, dt, int(step - prev))
        prev = step
        times.append(step * dt)
        pi.append(participation_ratio(state.exciton))
        if pi[-1] >= 1.05 * pi_s:
            break
    return ObservableSeries(np.asarray(times), np.asarray(pi),
                            label="participation_ratio")


@dataclass
class ThresholdScanResult:
    rows: list[dict]
    config: ExperimentConfig


def run_threshold_scan(config: ExperimentConfig,
                       t_max: float | None = None) -> ThresholdScanResult:
    """Mean first time for the participation ratio to reach a threshold.

    Scans the (chi, T) grid; every grid point reports the mean crossing
    time over the ensemble together with the number of censored
    (non-crossing) trajectories.
    """
    if not config.T_grid:
        raise ValueError("threshold-scan needs a T_grid")
    chi_values = config.chi_grid or (config.params.chi_E,)
    t_cap = t_max if t_max is not None else _evolve_duration(config, 2000.0)
    rows = []
    for chi in chi_values:
        for T in config.T_grid:
            params = config.params.replace(chi_E=float(chi), chi_J=float(chi),
                                           T=float(T))
            series = _map_indexed(
                _threshold_trajectory,
                [(config, params, i, t_cap, config.pi_threshold)
                 for i in range(config.ensemble_size)],
                config.workers)
            row = {"chi": float(chi), "T": float(T), "t_mean": np.nan,
                   "n_crossed": 0, "censored": config.ensemble_size}
            try:
                est = threshold_time(series, config.pi_threshold)
                row.update(t_mean=est.mean_time, n_crossed=est.n_crossed,
                           censored=est.censored)
            except UndefinedObservableError:
                pass
            rows.append(row)
    return ThresholdScanResult(rows, config)


# ----------------------------------------------------------------------
# Equilibrium spectra
# ----------------------------------------------------------------------

@dataclass
class SpectrumResult:
    grids: dict[str, SpectrumGrid]
    config: ExperimentConfig


def _spectrum_realization(config: ExperimentConfig, stream_id: int):
    params = config.params
    dt = config.integrator.dt
    rng = RngStream(config.seed, stream_id).generator()
    coupled = params.chi_E != 0.0 or params.chi_J != 0.0
    lattice = sample_initial_lattice(params, rng)
    t0 = _thermal_duration(config)
    if coupled:
        exciton = sample_exciton_initial("random-phase", params.L, rng)
        state = SystemState(lattice, exciton, t=0.0)
        advance_langevin_coupled(state, params, dt, int(round(t0 / dt)), rng)
        state.t = 0.0
    else:
        thermalize(lattice, params, rng, dt=dt, t0=t0)
        exciton = sample_exciton_initial("random-phase", params.L, rng)
        state = SystemState(lattice, exciton, t=0.0)
    stride_steps = max(int(round(config.sample_stride / dt)), 1)
    n_samples = int(round(config.record_length / config.sample_stride))
    want_exciton = "exciton" in config.fields and coupled
    u_rec = np.empty((n_samples, params.L)) if "lattice" in config.fields else None
    d_rec = np.empty((n_samples, params.L)) if want_exciton else None
    for j in range(n_samples):
        advance_coupled(state, params, dt, stride_steps)
        if u_rec is not None:
            u_rec[j] = state.lattice.u
        if d_rec is not None:
            d_rec[j] = state.exciton.density
    out = {}
    for name, rec in (("lattice", u_rec), ("exciton", d_rec)):
        if rec is None:
            continue
        psd_rows = []
        for m in config.modes:
            series = mode_projection(rec, m)
            omega, psd = power_spectrum(series, config.sample_stride)
            psd_rows.append(psd)
        out[name] = (omega, np.asarray(psd_rows))
    return out


def run_spectrum(config: ExperimentConfig) -> SpectrumResult:
    """Equilibrium PSD of lattice displacements and excitation density.

    With coupling on, the excitation (random-phase delocalized) is
    present during thermalization; modes are projected on the fly during
    the microcanonical record and periodograms are averaged over
    realizations.
    """
    results = _map_indexed(
        _spectrum_realization,
        [(config, i) for i in range(config.ensemble_size)],
        config.workers)
    grids = {}
    L = config.params.L
    k_values = 2.0 * np.pi * np.asarray(config.modes) / L
    for name in results[0]:
        omega = results[0][name][0]
        power = pairwise_mean([r[name][1] for r in results])
        grids[name] = SpectrumGrid(
            mode_indices=np.asarray(config.modes), k_values=k_values,
            omega_values=omega, power=power,
            record_length=config.record_length,
            realizations=len(results),
            sample_stride=config.sample_stride)
    return SpectrumResult(grids, config)


# ----------------------------------------------------------------------
# Open-system transport efficiency
# ----------------------------------------------------------------------

@dataclass
class EfficiencyResult:
    rows: list[dict]
    per_realization: dict[float, list[dict]]
    config: ExperimentConfig


def _efficiency_geometry(config: ExperimentConfig,
                         params: ModelParams) -> ModelParams:
    L = params.L
    source = config.source_site % L
    if config.geometry == "chain":
        sink = (source - 1) % L  # far end of the cut ring
        mask = np.ones(L)
        mask[(source - 1) % L] = 0.0
        return params.replace(sink_index=sink, bond_mask=mask)
    return params.replace(sink_index=(source + L // 2) % L)


def _efficiency_realization(config: ExperimentConfig, T: float,
                            stream_id: int):
    dt = config.integrator.dt
    rng = RngStream(config.seed, stream_id).generator()
    base = config.params.replace(T=float(T))
    if config.disorder is not None:
        base = base.replace(E0=config.disorder.draw(base.L, rng))
    params = _efficiency_geometry(config, base)
    dephasing = config.kind == "dephasing-efficiency"
    if dephasing:
        params = params.replace(chi_E=0.0, chi_J=0.0)
        exciton = sample_exciton_initial("delta", params.L, rng,
                                         site=config.source_site)
        state = None
    else:
        lattice = sample_initial_lattice(params, rng)
        thermalize(lattice, params, rng, dt=dt, t0=_thermal_duration(config))
        exciton = sample_exciton_initial("delta", params.L, rng,
                                         site=config.source_site)
        state = SystemState(lattice, exciton, t=0.0)
    acc = OpenAccumulators()
    chunk = max(int(round(1.0 / dt)), 1)
    n_max = int(np.ceil(config.t_max / dt))
    times = [0.0]
    norms = [1.0]
    occs = [float(np.abs(exciton.b[params.sink_index]) ** 2)]
    steps = 0
    complete = False
    while steps < n_max:
        n_adv = min(chunk, n_max - steps)
        if dephasing:
            advance_dephasing(exciton, params, dt, n_adv, rng, acc)
        else:
            advance_open(state, params, dt, n_adv, acc)
            exciton = state.exciton
        steps += n_adv
        times.append(steps * dt)
        norms.append(exciton.norm)
        occs.append(float(np.abs(exciton.b[params.sink_index]) ** 2))
        if norms[-1] <= config.survival_threshold:
            complete = True
            break
    times = np.asarray(times)
    norms = np.asarray(norms)
    occs = np.asarray(occs)
    eta = 2.0 * params.Gamma * acc.sink_time_integral
    eta += _tail_estimate(times, norms, occs, params.Gamma)
    residual = abs(2.0 * params.Gamma * acc.sink_time_integral
                   + 2.0 * params.gamma_r * acc.norm_time_integral
                   + norms[-1] - 1.0)
    return {"eta": float(eta), "residual": float(residual),
            "t_end": float(times[-1]), "complete": complete}


def run_efficiency(config: ExperimentConfig) -> EfficiencyResult:
    """Sink-capture probability versus temperature.

    Per (temperature, realization): draw static disorder, prepare the
    environment (thermalized lattice, or dephasing noise for the
    lattice-free comparison model), inject the excitation at the source
    and integrate the norm-losing dynamics down to the survival
    threshold.  eta is averaged over realizations; incomplete runs
    (threshold not reached within ``t_max``) are flagged, not hidden.
    """
    if config.params.Gamma <= 0:
        raise ValueError("efficiency runs need Gamma > 0")
    T_values = config.T_grid or (config.params.T,)
    rows = []
    per_real = {}
    for ti, T in enumerate(T_values):
        ids = [ti * config.ensemble_size + i
               for i in range(config.ensemble_size)]
        outs = _map_indexed(
            _efficiency_realization,
            [(config, float(T), sid) for sid in ids],
            config.workers)
        per_real[float(T)] = outs
        etas = np.array([o["eta"] for o in outs])
        rows.append({
            "T": float(T),
            "eta": float(pairwise_mean([np.atleast_1d(e) for e in etas])[0]),
            "eta_sem": float(etas.std(ddof=1) / np.sqrt(len(etas)))
            if len(etas) > 1 else 0.0,
            "max_residual": float(max(o["residual"] for o in outs)),
            "incomplete": int(sum(not o["complete"] for o in outs)),
        })
    return EfficiencyResult(rows, per_real, config)


# ----------------------------------------------------------------------
# Validation suite
# ----------------------------------------------------------------------

def run_validate(config: ExperimentConfig | None = None,
                 corrupt: str | None = None) -> dict:
    """Fast machine-readable self-checks of the integrator and forces.

    ``corrupt`` deliberately breaks one ingredient (``"exciton-force-sign"``)
    so callers can verify that the corresponding check fails.
    """
    from . import validation

    return validation.run_all(config, corrupt=corrupt)


# ----------------------------------------------------------------------
# Defaults, dispatch and emission
# ----------------------------------------------------------------------

def default_config(kind: str, profile: str = "desk", seed: int = 0,
                   workers: int = 1) -> ExperimentConfig:
    """Ready-to-run config for each experiment kind at the given scale."""
    desk = profile == "desk"
    if not desk and profile != "paper":
        raise ValueError("profile must be 'desk' or 'paper'")
    integ = IntegratorConfig()
    common = dict(seed=seed, workers=workers, integrator=integ)
    if kind == "spreading":
        params = ModelParams(L=200 if desk else 1000, beta=1.0,
                             chi_E=1.0, chi_J=1.0, T=0.1)
        return ExperimentConfig(kind, params, ensemble_size=16 if desk else 50,
                                protocol=[Phase("thermalize", params.L),
                                          Phase("evolve", 500.0 if desk else 5e3)],
                                **common)
    if kind == "diffusion-scan":
        params = ModelParams(L=500 if desk else 1000, beta=1.0,
                             chi_E=1.0, chi_J=1.0, T=1.0)
        return ExperimentConfig(kind, params, ensemble_size=16 if desk else 50,
                                T_grid=(1.0, 10.0, 100.0),
                                coupling_modes=("full",),
                                protocol=[Phase("thermalize", params.L),
                                          Phase("evolve", 3000.0 if desk else 2e4)],
                                **common)
    if kind == "threshold-scan":
        params = ModelParams(L=500 if desk else 1000, beta=1.0,
                             chi_E=1.0, chi_J=1.0, T=1.0)
        return ExperimentConfig(kind, params, ensemble_size=16 if desk else 50,
                                T_grid=(0.5, 2.0, 10.0, 50.0),
                                chi_grid=(1.0,),
                                pi_threshold=100.0,
                                protocol=[Phase("thermalize", params.L),
                                          Phase("evolve", 2000.0 if desk else 1e4)],
                                **common)
    if kind == "spectrum":
        params = ModelParams(L=256, beta=1.0, T=1.0, chi_E=1.0, chi_J=1.0)
        return ExperimentConfig(kind, params,
                                ensemble_size=16 if desk else 50,
                                record_length=2.0**13 if desk else 2.0**16,
                                fields=("lattice", "exciton"),
                                **common)
    if kind in ("efficiency", "dephasing-efficiency"):
        L = 100 if desk else 200
        params = ModelParams(L=L, beta=1.0, chi_E=1.0, chi_J=1.0, T=1.0,
                             gamma_r=1e-4, Gamma=1e-1, sink_index=L // 2)
        integ = IntegratorConfig(dt=2e-3 if kind == "efficiency" else 5e-3)
        common["integrator"] = integ
        return ExperimentConfig(kind, params, ensemble_size=20,
                                disorder=DisorderSpec(),
                                T_grid=(0.1, 0.316, 1.0, 3.16, 10.0, 31.6, 100.0),
                                **common)
    if kind == "validate":
        return ExperimentConfig(kind, ModelParams(L=64, beta=1.0, chi_E=1.0,
                                                  chi_J=1.0, T=1.0), **common)
    raise ValueError(f"unknown experiment kind {kind!r}")


def run_experiment(config: ExperimentConfig):
    """Dispatch a config to its runner."""
    kind = config.kind
    if kind == "spreading":
        return run_spreading(config)
    if kind == "diffusion-scan":
        return run_diffusion_scan(config)
    if kind == "threshold-scan":
        return run_threshold_scan(config)
    if kind == "spectrum":
        return run_spectrum(config)
    if kind in ("efficiency", "dephasing-efficiency"):
        return run_efficiency(config)
    if kind == "validate":
        return run_validate(config)
    raise ValueError(f"unknown experiment kind {kind!r}")


def _write_table(path: str, header: list[str], names: list[str],
                 rows) -> None:
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("# columns: " + " ".join(names) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, str):
                    cells.append(v)
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                else:
                    cells.append(f"{float(v):.12e}")
            fh.write(" ".join(cells) + "\n")


def _series_rows(*series: ObservableSeries):
    times = series[0].times
    return zip(times, *(s.values for s in series))


def emit(result, out_dir: str) -> RunManifest:
    """Write plot-ready tables plus a manifest for a runner result."""
    os.makedirs(out_dir, exist_ok=True)
    config: ExperimentConfig = result.config
    h = config_hash(config)
    header = [f"excichain {__version__}", f"kind: {config.kind}",
              f"config_hash: {h}", f"seed: {config.seed}"]
    outputs = []

    def path(name):
        outputs.append(name)
        return os.path.join(out_dir, name)

    if isinstance(result, SpreadingResult):
        _write_table(path("spreading_pi.dat"), header,
                     ["t", "pi", "kinetic_T"],
                     _series_rows(result.pi, result.kinetic_T))
        _write_table(path("spreading_conservation.dat"), header,
                     ["t", "norm", "energy", "momentum"],
                     _series_rows(result.norm, result.energy, result.momentum))
        _write_table(path("final_profile.dat"), header, ["site", "density"],
                     enumerate(result.final_density))
        stream_ids = list(range(config.ensemble_size))
    elif isinstance(result, DiffusionScanResult):
        _write_table(path("diffusion_scan.dat"), header,
                     ["mode", "T", "D", "exponent", "residual",
                      "window_lo", "window_hi", "status"],
                     [[r["mode"], r["T"], r["D"], r["exponent"], r["residual"],
                       r["window_lo"], r["window_hi"],
                       r["status"].split()[0]] for r in result.rows])
        stream_ids = list(range(config.ensemble_size))
    elif isinstance(result, ThresholdScanResult):
        _write_table(path("threshold_scan.dat"), header,
                     ["chi", "T", "t_mean", "n_crossed", "censored"],
                     [[r["chi"], r["T"], r["t_mean"], r["n_crossed"],
                       r["censored"]] for r in result.rows])
        stream_ids = list(range(config.ensemble_size))
    elif isinstance(result, SpectrumResult):
        for name, grid in result.grids.items():
            rows = []
            for i, m in enumerate(grid.mode_indices):
                for j, w in enumerate(grid.omega_values):
                    rows.append([int(m), grid.k_values[i], w, grid.power[i, j]])
            _write_table(path(f"spectrum_{name}.dat"),
                         header + [f"record_length: {grid.record_length}",
                                   f"realizations: {grid.realizations}",
                                   f"sample_stride: {grid.sample_stride}"],
                         ["m", "k", "omega", "power"], rows)
        stream_ids = list(range(config.ensemble_size))
    elif isinstance(result, EfficiencyResult):
        _write_table(path("efficiency.dat"), header,
                     ["T", "eta", "eta_sem", "max_residual", "incomplete"],
                     [[r["T"], r["eta"], r["eta_sem"], r["max_residual"],
                       r["incomplete"]] for r in result.rows])
        stream_ids = sorted({ti * config.ensemble_size + i
                             for ti in range(len(result.per_realization))
                             for i in range(config.ensemble_size)})
    else:
        raise TypeError(f"cannot emit result of type {type(result).__name__}")

    manifest = RunManifest(
        kind=config.kind, config=config.to_dict(), config_hash=h,
        seed=config.seed, stream_ids=stream_ids, version=__version__,
        outputs=outputs,
        wallclock_start=time.strftime("%Y-%m-%dT%H:%M:%S"),
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(manifest.to_json())
    return manifest
