"""Seeded sweeps over backoff and SNR for a matrix of receiver variants.

Random streams are keyed, not sequential. Symbols and channel draws for
block ``j`` come from ``(seed, 1, j)`` and are shared by every sweep point
(common random numbers); noise for block ``j`` at point ``(b, s)`` comes from
``(seed, 2, b, s, j)``; slow-time training for backoff ``b`` from
``(seed, 0, b)``. Receiver variants only consume randomness through their own
model initialisation, keyed by the model name, so adding or removing a
variant never changes another variant's numbers.
"""

from __future__ import annotations

import csv
import hashlib
import platform
import sys
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import distortion_spectrum_report, effective_channel
from ..channel import draw_channel
from ..detect import dassd_detect, select_branch, train_dassd, DetectorParams
from ..link import LinkSetup, calibrate, run_front_end
from ..metrics import gmi_terms, ber_from_counts
from ..pa import SYNTHETIC_GAN, LinearPA, SalehParams
from ..postdist import GPRPostDistorter, MMDetector, NNPostDistorter, VolterraPostDistorter, regressor_matrix, save_model
from ..postdist.mm import mm_correct
from ..txchain import FrameLayout, QamAlphabet, design_rrc
from .config import ScenarioConfig, VariantSpec, load_config

RESULT_COLUMNS = [
    "scenario", "backoff_dB", "snr_dB", "receiver", "blocks", "symbols", "bit_errors", "bits",
    "ber", "ber_ci_low", "ber_ci_high", "air_bps", "air_stderr", "outage_threshold", "p_out",
]
SPECTRUM_COLUMNS = [
    "scenario", "profile", "channel_draw", "backoff_dB", "branch", "selected", "fade_depth_dB",
    "image_cancellation_dB", "fade_omega",
    "linear_psd_dB", "distortion_psd_dB", "ratio_min_dB", "ratio_max_dB", "power_error",
]
SCATTER_COLUMNS = ["backoff_dB", "snr_dB", "receiver", "re", "im"]
TIMING_COLUMNS = ["backoff_dB", "snr_dB", "stage", "seconds"]


@dataclass
class RunResult:
    config: ScenarioConfig
    rows: list = field(default_factory=list)
    scatter: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    run_dir: Path | None = None

    def select(self, **where) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in where.items())]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else f"{float(v):.10g}"
    return str(v)


def write_csv(path: Path, columns: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def _seed(*key) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(k) for k in key])


def _pa_model(cfg: ScenarioConfig):
    if cfg.pa.model == "linear":
        return LinearPA()
    if cfg.pa.model == "memory_poly":
        return SYNTHETIC_GAN
    s = cfg.pa.saleh
    return SalehParams(s.g0, s.a_sat, s.alpha, s.beta)


def _model_key(v: VariantSpec, cfg: ScenarioConfig):
    if v.postdist == "none":
        return None
    if v.postdist == "mm":
        return ("mm", 0)
    return (v.postdist, v.depth(cfg.receiver.memory_depth))


def _make_model(key, cfg: ScenarioConfig, alphabet: QamAlphabet):
    kind, m = key
    rc = cfg.receiver
    if kind == "mm":
        return MMDetector(alphabet, rc.mm_min_hits)
    if kind == "vs":
        return VolterraPostDistorter(m, rc.volterra.cubic)
    if kind == "gpr":
        return GPRPostDistorter(m, rc.gpr.n_segments, rc.gpr.max_iter)
    seed = (zlib.crc32(f"nn@{m}".encode()) ^ cfg.scenario.seed) & 0x7FFFFFFF
    return NNPostDistorter(m, rc.nn.hidden, rc.nn.epochs, rc.nn.lambda_init, random_state=seed)


def train_slow_time(cfg: ScenarioConfig, setup: LinkSetup, keys, seq: np.random.SeedSequence, timings=None):
    """Fit every post-distorter once for one PA state.

    Training blocks pass through the PA and matched filter without multipath
    or noise; the nominal branch feeds all models.
    """
    rng = np.random.default_rng(seq)
    alph, lay = setup.alphabet, setup.layout
    st = alph.points[alph.random_indices(lay.n_st, rng)]
    blocks = np.array_split(st, int(np.ceil(lay.n_st / lay.n_data)))
    ft = alph.points[alph.random_indices(lay.n_ft, rng)]
    fe = run_front_end(setup, ft, blocks, draw_channel("awgn", 1, setup.sps), 0.0, rng, delta=0.0, branches=[0])
    z_blocks = [d[0] for d in fe.data_z]
    models = {}
    for key in keys:
        t0 = time.perf_counter()
        model = _make_model(key, cfg, alph)
        if key[0] == "mm":
            model.fit(np.concatenate(z_blocks), st)
        else:
            model.fit_blocks(z_blocks, blocks)
        models[key] = model
        if timings is not None:
            timings.append((f"st_training:{key[0]}@{key[1]}", time.perf_counter() - t0))
    return models


class _Accumulator:
    def __init__(self):
        self.errors = 0
        self.bits = 0
        self.t_sum = 0.0
        self.t_sq = 0.0
        self.n = 0
        self.block_air = []

    def add(self, errors: int, bits: int, terms: np.ndarray, bps: int):
        self.errors += errors
        self.bits += bits
        self.t_sum += float(terms.sum())
        self.t_sq += float(np.sum(terms**2))
        self.n += terms.shape[0]
        self.block_air.append(bps - float(terms.mean()))

    def air(self, bps: int):
        mean = self.t_sum / self.n
        var = max(self.t_sq / self.n - mean**2, 0.0) * self.n / max(self.n - 1, 1)
        return bps - mean, float(np.sqrt(var / self.n))


def _mm_params(z_ft: np.ndarray, ft: np.ndarray, table: np.ndarray, alphabet: QamAlphabet) -> DetectorParams:
    lab = np.argmin(np.abs(ft[:, None] - alphabet.points[None, :]), axis=1)
    r = float(np.mean(np.abs(z_ft - table[lab] * ft) ** 2))
    return DetectorParams(np.ones(1), np.array([[max(r, 1e-300)]]), n_train=ft.shape[0])


def _combine(soft: np.ndarray, params: DetectorParams) -> np.ndarray:
    """Whitened matched combination of branch estimates onto the symbol scale."""
    w = np.linalg.solve(params.r_eta, params.beta)
    return (soft @ w.conj()) / np.vdot(params.beta, w)


class _BlockContext:
    """Front-end outputs of one block plus a cache of post-distorted branch streams."""

    def __init__(self, fe, models, mu):
        self.fe = fe
        self.models = models
        self.mu = mu
        self._cache = {}

    def soft(self, key, branch: int):
        ck = (key, branch)
        if ck not in self._cache:
            zf, zd = self.fe.ft_z[branch], self.fe.data_z[0][branch]
            if key is not None and key[0] != "mm":
                m = self.models[key]
                zf = m.predict(regressor_matrix(zf, m.memory_depth))
                zd = m.predict(regressor_matrix(zd, m.memory_depth))
            self._cache[ck] = (zf, zd)
        return self._cache[ck]


def _evaluate(v: VariantSpec, key, ctx: _BlockContext, ft, data, lab, alph: QamAlphabet):
    """Decisions, per-symbol rate terms and a display stream for one variant on one block."""
    if v.postdist == "mm":
        table = ctx.models[key].table_
        means = (table * alph.points)[:, None]
        branches = range(ctx.mu) if v.detector == "best" else [0]
        best, best_rate = 0, -np.inf
        for b in branches:
            zf, _ = ctx.soft(key, b)
            p = _mm_params(zf, ft, table, alph)
            rate = -np.mean(gmi_terms(zf, ft, p, alph, means))
            if rate > best_rate:
                best, best_rate = b, rate
        zf, zd = ctx.soft(key, best)
        p = _mm_params(zf, ft, table, alph)
        return mm_correct(zd, table, alph), gmi_terms(zd, data, p, alph, means), zd
    if v.detector == "single":
        cols = [0]
    elif v.detector == "best":
        cols = [select_branch(np.stack([ctx.soft(key, b)[0] for b in range(ctx.mu)], axis=1), ft, alph)]
    else:
        cols = list(range(ctx.mu))
    S_ft = np.stack([ctx.soft(key, b)[0] for b in cols], axis=1)
    S_d = np.stack([ctx.soft(key, b)[1] for b in cols], axis=1)
    p = train_dassd(S_ft, ft)
    return dassd_detect(S_d, p, alph), gmi_terms(S_d, data, p, alph), _combine(S_d, p)


def _branches_needed(variants) -> list[int] | None:
    return None if any(v.detector != "single" for v in variants) else [0]


def _run_link(cfg: ScenarioConfig, result: RunResult, log) -> None:
    alph = QamAlphabet.square(cfg.modulation.order)
    pulse = design_rrc(cfg.pulse.roll_off, cfg.pulse.span, cfg.pulse.sps)
    lc = cfg.layout
    layout = FrameLayout(lc.n_data, lc.n_cp, lc.n_cs, lc.n_ft, lc.n_st)
    variants = cfg.variants
    device = _pa_model(cfg)
    seed = cfg.scenario.seed
    bps = alph.bits_per_symbol
    branches = _branches_needed(variants)
    mu = pulse.sps if branches is None else 1
    keys = sorted({k for v in variants if not v.linear_pa and (k := _model_key(v, cfg)) is not None})
    need_linear = any(v.linear_pa for v in variants)
    need_device = any(not v.linear_pa for v in variants)
    fde = cfg.receiver.fde
    threshold = cfg.metrics.outage_threshold

    lin_setup = LinkSetup(alph, layout, pulse, LinearPA(), calibrate(alph, pulse, LinearPA(), None), fde.l_b, fde.l_f)
    for bi, bo in enumerate(cfg.backoffs):
        t0 = time.perf_counter()
        setup = LinkSetup(alph, layout, pulse, device, calibrate(alph, pulse, device, bo), fde.l_b, fde.l_f)
        st_times = []
        models = train_slow_time(cfg, setup, keys, _seed(seed, 0, bi), st_times) if keys and need_device else {}
        for stage, sec in st_times:
            result.timings.append({"backoff_dB": bo, "snr_dB": None, "stage": stage, "seconds": sec})
        if cfg.output.save_models and result.run_dir is not None:
            mdir = result.run_dir / "models"
            mdir.mkdir(exist_ok=True)
            for (kind, m), model in models.items():
                save_model(model, mdir / f"bo{bi}_{kind}_m{m}.npz",
                           {"backoff_dB": bo, "seed": seed, "scenario": cfg.scenario.name})
        log(f"[{cfg.scenario.name}] backoff {bo} dB: slow-time training {time.perf_counter() - t0:.1f} s")

        for si, snr in enumerate(cfg.sweep.snr_db):
            t1 = time.perf_counter()
            n0 = 10.0 ** (-snr / 10.0)
            acc = {v.name: _Accumulator() for v in variants}
            for j in range(cfg.scenario.trials):
                r_sym = np.random.default_rng(_seed(seed, 1, j))
                noise_seq = _seed(seed, 2, bi, si, j)
                ch = draw_channel(cfg.channel.profile, cfg.channel.span_symbols, pulse.sps, seed=r_sym)
                ft = alph.points[alph.random_indices(layout.n_ft, r_sym)]
                lab = alph.random_indices(layout.n_data, r_sym)
                data = alph.points[lab]
                ctx = {}
                if need_device:
                    fe = run_front_end(setup, ft, [data], ch, n0, np.random.default_rng(noise_seq), branches=branches)
                    ctx[False] = _BlockContext(fe, models, mu)
                if need_linear:
                    fe = run_front_end(lin_setup, ft, [data], ch, n0, np.random.default_rng(noise_seq),
                                       branches=branches)
                    ctx[True] = _BlockContext(fe, {}, mu)
                for v in variants:
                    key = None if v.linear_pa else _model_key(v, cfg)
                    dec, terms, disp = _evaluate(v, key, ctx[v.linear_pa], ft, data, lab, alph)
                    errors = int(np.count_nonzero(alph.bit_map[dec] != alph.bit_map[lab]))
                    acc[v.name].add(errors, lab.shape[0] * bps, terms, bps)
                    if j == 0 and cfg.metrics.scatter_points:
                        for s in disp[:cfg.metrics.scatter_points]:
                            result.scatter.append({"backoff_dB": bo, "snr_dB": snr, "receiver": v.name,
                                                   "re": float(s.real), "im": float(s.imag)})
            for v in variants:
                a = acc[v.name]
                b = ber_from_counts(a.errors, a.bits)
                air, se = a.air(bps)
                p_out = None if threshold is None else float(np.mean(np.array(a.block_air) < threshold))
                result.rows.append({
                    "scenario": cfg.scenario.name, "backoff_dB": bo, "snr_dB": snr, "receiver": v.name,
                    "blocks": cfg.scenario.trials, "symbols": a.bits // bps, "bit_errors": a.errors,
                    "bits": a.bits, "ber": b.value, "ber_ci_low": b.ci_low, "ber_ci_high": b.ci_high,
                    "air_bps": air, "air_stderr": se, "outage_threshold": threshold, "p_out": p_out,
                })
            dt = time.perf_counter() - t1
            result.timings.append({"backoff_dB": bo, "snr_dB": snr, "stage": "blocks", "seconds": dt})
            log(f"[{cfg.scenario.name}] backoff {bo} dB, SNR {snr} dB: {cfg.scenario.trials} blocks in {dt:.1f} s")


def _image_fade_branch(ec, min_fade_db: float, min_cancellation_db: float) -> int | None:
    """Lowest branch whose deepest fade is deep enough and caused by image cancellation."""
    for i in range(ec.n_branches):
        if ec.fade_depth_db(i) >= min_fade_db and ec.image_cancellation_db(i) >= min_cancellation_db:
            return i
    return None


def _run_spectrum(cfg: ScenarioConfig, result: RunResult, log) -> list:
    alph = QamAlphabet.square(cfg.modulation.order)
    pulse = design_rrc(cfg.pulse.roll_off, cfg.pulse.span, cfg.pulse.sps)
    sc = cfg.spectrum
    pa = _pa_model(cfg)
    bo = cfg.backoffs[0]
    seed = cfg.scenario.seed
    reports = []
    for profile in sc.profiles:
        t0 = time.perf_counter()
        for d in range(sc.max_draws):
            ch = draw_channel(profile, cfg.channel.span_symbols, pulse.sps, seed=_seed(seed, 3, d))
            if profile != "dense_exponential":
                focus = 0
                break
            ec = effective_channel(ch, pulse, 1.0, sc.segment_len)
            focus = _image_fade_branch(ec, sc.min_fade_db, sc.min_cancellation_db)
            if focus is not None:
                break
        else:
            raise RuntimeError(f"no {profile} draw with a {sc.min_fade_db} dB image-cancellation fade "
                               f"in {sc.max_draws} tries")
        rep = distortion_spectrum_report(alph, pulse, pa, ch, bo, sc.n_symbols, sc.segment_len,
                                         seed=_seed(seed, 4, d))
        reports.append((profile, d, rep))
        for i in range(rep.n_branches):
            k = rep.fade_bin(i)
            ratio = rep.ratio_db(i)
            total = rep.linear[i].power + rep.distortion[i].power
            result.rows.append({
                "scenario": cfg.scenario.name, "profile": profile, "channel_draw": d, "backoff_dB": bo,
                "branch": i, "selected": int(i == focus), "fade_depth_dB": rep.effective.fade_depth_db(i),
                "image_cancellation_dB": rep.effective.image_cancellation_db(i),
                "fade_omega": float(rep.linear[i].omega[k]),
                "linear_psd_dB": float(rep.linear[i].db()[k]),
                "distortion_psd_dB": float(rep.distortion[i].db()[k]),
                "ratio_min_dB": float(ratio.min()), "ratio_max_dB": float(ratio.max()),
                "power_error": float(total / rep.total_power[i] - 1.0),
            })
        dt = time.perf_counter() - t0
        result.timings.append({"backoff_dB": bo, "snr_dB": None, "stage": f"spectrum:{profile}", "seconds": dt})
        log(f"[{cfg.scenario.name}] {profile} draw {d} branch {focus}: spectra in {dt:.1f} s")
    return reports


def _manifest(cfg: ScenarioConfig, files: list) -> str:
    import scipy
    import sklearn

    lines = [
        f"scenario: {cfg.scenario.name}",
        f"kind: {cfg.scenario.kind}",
        f"config_sha256: {cfg.config_hash()}",
        f"seed: {cfg.scenario.seed}",
        f"trials: {cfg.scenario.trials}",
        f"variants: {', '.join(cfg.receiver.variants)}",
        f"scfde: {__version__}",
        f"python: {platform.python_version()}",
        f"numpy: {np.__version__}",
        f"scipy: {scipy.__version__}",
        f"scikit-learn: {sklearn.__version__}",
        f"platform: {sys.platform}",
    ]
    for f in files:
        digest = hashlib.sha256(f.read_bytes()).hexdigest()
        lines.append(f"file: {f.name} sha256={digest}")
    return "\n".join(lines) + "\n"


def run_scenario(config, out_dir=None, log=None) -> RunResult:
    """Execute a scenario; with ``out_dir`` the run directory receives the CSV artifacts.

    Writes ``results.csv`` (deterministic for a given config and seed),
    ``timings.csv`` (wall-clock, not reproducible), ``scatter.csv`` when
    requested, per-profile spectra for spectrum scenarios, the resolved
    ``config.json`` and ``manifest.txt``.
    """
    cfg = load_config(config)
    log = log or (lambda msg: None)
    result = RunResult(cfg)
    if out_dir is not None:
        result.run_dir = Path(out_dir) / cfg.scenario.name
        result.run_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    reports = []
    if cfg.scenario.kind == "spectrum":
        reports = _run_spectrum(cfg, result, log)
    else:
        _run_link(cfg, result, log)
    result.timings.append({"backoff_dB": None, "snr_dB": None, "stage": "total",
                           "seconds": time.perf_counter() - t0})
    if result.run_dir is None:
        return result
    rd = result.run_dir
    files = []
    columns = SPECTRUM_COLUMNS if cfg.scenario.kind == "spectrum" else RESULT_COLUMNS
    write_csv(rd / "results.csv", columns, result.rows)
    files.append(rd / "results.csv")
    for profile, _, rep in reports:
        rep.to_csv(rd / f"spectra_{profile}.csv")
        files.append(rd / f"spectra_{profile}.csv")
    if result.scatter:
        write_csv(rd / "scatter.csv", SCATTER_COLUMNS, result.scatter)
        files.append(rd / "scatter.csv")
    write_csv(rd / "timings.csv", TIMING_COLUMNS, result.timings)
    (rd / "config.json").write_text(cfg.model_dump_json(indent=2) + "\n", encoding="utf-8")
    (rd / "manifest.txt").write_text(_manifest(cfg, files), encoding="utf-8")
    return result
