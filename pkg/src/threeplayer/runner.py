"""Scenario execution, the comparison table and run reports."""

from __future__ import annotations

import dataclasses
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import games, toy
from .artifacts import (FormatError, flatten_stores, load_checkpoint, load_dataset_csv,
                        save_checkpoint, save_dataset_csv, split_stores, write_raster_ppm)
from .config import ExperimentConfig

NAN = float("nan")
COMPARE_SCENARIOS = ("baseline", "cgan", "cgan-augmented", "acgan", "three-player")
ACCURACY_TOLERANCE = 0.01  # three-player may trail the baseline by at most one point
BASELINE_FLOOR = 0.98


@dataclass
class World:
    x: np.ndarray
    y: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    spec: toy.GaussianClassSpec | None  # known generating distribution, toy worlds only
    label_names: tuple

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def make_world(cfg: ExperimentConfig, data_seed: int, base_dir: str = ".") -> World:
    if cfg.is_toy:
        spec = toy.separable_spec() if cfg.dataset == "toy-separable" else toy.overlap_spec()
        x, y = toy.sample_mixture(spec, cfg.train_per_class, data_seed)
        xt, yt = toy.sample_mixture(spec, cfg.test_per_class, cfg.test_seed)
        return World(x, y, xt, yt, spec, (0, 1))
    train = load_dataset_csv(os.path.join(base_dir, cfg.dataset))
    test = load_dataset_csv(os.path.join(base_dir, cfg.test_dataset))
    index = {name: k for k, name in enumerate(train.label_names)}
    unknown = sorted(set(test.label_names) - set(index))
    if unknown:
        raise FormatError(f"test labels {unknown} do not occur in the training set")
    if test.x.shape[1] != train.x.shape[1]:
        raise FormatError("training and test sets have different feature counts")
    yt = np.array([index[test.label_names[k]] for k in test.y])
    return World(train.x, train.y, test.x, yt, None, train.label_names)


@dataclass
class ScenarioResult:
    scenario: str
    seed: int
    status: str = "ok"
    accuracy: float = NAN
    accuracy_without_real: float = NAN
    boundary_angle: float = NAN
    overlap_initial: float = NAN
    overlap_final: float = NAN
    traces: dict = field(default_factory=dict)
    error: str = ""
    wall_clock: float = 0.0


@dataclass
class _Outcome:
    classifier: games.Classifier
    stores: dict
    samples: tuple | None = None
    samples_initial: tuple | None = None
    accuracy_without_real: float = NAN
    traces: dict = field(default_factory=dict)
    overlap_trace: list | None = None


class _Session:
    """Shared, lazily trained pieces for one (seed, data seed) pair."""

    def __init__(self, cfg: ExperimentConfig, world: World, seed: int, pretrained: dict | None):
        self.cfg, self.world, self.seed = cfg, world, seed
        self.gc = cfg.game_config(world.num_classes, world.dim, seed)
        self.pretrained = pretrained or {}

    @cached_property
    def baseline(self) -> games.ClassifierResult:
        return games.train_classifier(self.gc, self.world.x, self.world.y)

    def baseline_params(self) -> dict:
        return self.pretrained.get("c") or self.baseline.classifier.params

    @cached_property
    def cgan(self) -> games.CganResult:
        if "g" in self.pretrained and "d" in self.pretrained:
            return games.CganResult(self.gc.g_spec(), self.gc.d_spec(), self.pretrained["g"],
                                    self.pretrained["d"], [], [])
        return games.train_cgan(self.gc, self.world.x, self.world.y, lr_decay=self.cfg.cgan_lr_decay)

    def eval_samples(self, g_params) -> tuple:
        # the same latent draws every time, so overlap traces compare like with like
        rng = np.random.default_rng(games.stream_seed(self.seed, "eval"))
        return games.sample_generator(self.gc.g_spec(), g_params, self.cfg.eval_samples, rng)

    def overlap(self, g_params) -> float:
        if self.world.spec is None:
            return NAN
        return toy.overlap_score(self.eval_samples(g_params)[0], self.world.spec, self.cfg.tau)

    def overlap_callback(self, trace: list):
        every = self.cfg.overlap_every

        def cb(it, state):
            if (it + 1) % every == 0:
                trace.append(self.overlap(state.g))
        return cb

    # scenarios ------------------------------------------------------------------

    def run(self, scenario: str) -> _Outcome:
        return getattr(self, "_" + scenario.replace("-", "_"))()

    def _baseline(self) -> _Outcome:
        b = self.baseline
        return _Outcome(b.classifier, {"c": b.classifier.params},
                        traces={"c_loss": b.loss_trace, "train_accuracy": b.accuracy_trace})

    def _augmented(self, fraction: float) -> _Outcome:
        pre = self.cgan
        r = games.train_classifier(self.gc, self.world.x, self.world.y, generator=(pre.g_spec, pre.g),
                                   augment_fraction=fraction)
        return _Outcome(r.classifier, {"g": pre.g, "d": pre.d, "c": r.classifier.params},
                        samples=self.eval_samples(pre.g),
                        traces={"d_objective": pre.d_trace, "gan_loss": pre.g_trace, "c_loss": r.loss_trace,
                                "train_accuracy": r.accuracy_trace})

    def _cgan(self) -> _Outcome:
        return self._augmented(1.0)

    def _cgan_augmented(self) -> _Outcome:
        return self._augmented(self.cfg.augment_fraction)

    def _acgan(self) -> _Outcome:
        r = games.train_acgan(self.gc, self.world.x, self.world.y)
        samples = self.eval_samples(r.g)
        return _Outcome(r.classifier, {"g": r.g, "d": r.d}, samples=samples,
                        traces={"d_loss": r.d_trace, "g_loss": r.g_trace})

    def _frozen_game(self, trace: list) -> games.ThreePlayerResult:
        pre = self.cgan
        trace.append(self.overlap(pre.g))
        return games.train_three_player(self.gc, self.world.x, self.world.y, pre.g, pre.d,
                                        self.baseline_params(), freeze_classifier=True,
                                        callback=self.overlap_callback(trace))

    def _three_player(self) -> _Outcome:
        pre, x, y = self.cgan, self.world.x, self.world.y
        trace = []
        if self.cfg.three_player_mode == "joint":
            trace.append(self.overlap(pre.g))
            tp = games.train_three_player(self.gc, x, y, pre.g, pre.d, callback=self.overlap_callback(trace))
            return _Outcome(tp.classifier, {"g": tp.g, "d": tp.d, "c": tp.c, "g0": tp.g0},
                            samples=self.eval_samples(tp.g), samples_initial=self.eval_samples(tp.g0),
                            traces=dict(tp.traces), overlap_trace=trace)
        # frozen baseline drives the game, then a classifier is retrained from the
        # baseline's initial weights on real, initial-generator and game samples
        tp = self._frozen_game(trace)
        r = games.train_classifier_on_plan(self.gc, x, y, pre.g, tp.g)
        plan = self.gc.plan
        synth = plan.initial + plan.current
        no_real = dataclasses.replace(self.gc, plan=games.BatchPlan(
            0.0, plan.initial / synth if synth else 0.5, plan.current / synth if synth else 0.5))
        r0 = games.train_classifier_on_plan(no_real, x, y, pre.g, tp.g)
        traces = dict(tp.traces)
        traces.update(retrain_c_loss=r.loss_trace, train_accuracy=r.accuracy_trace)
        return _Outcome(r.classifier, {"g": tp.g, "d": tp.d, "c": r.classifier.params, "g0": tp.g0},
                        samples=self.eval_samples(tp.g), samples_initial=self.eval_samples(tp.g0),
                        accuracy_without_real=r0.classifier.accuracy(self.world.x_test, self.world.y_test),
                        traces=traces, overlap_trace=trace)

    def _frozen_classifier_game(self) -> _Outcome:
        trace = []
        tp = self._frozen_game(trace)
        return _Outcome(tp.classifier, {"g": tp.g, "d": tp.d, "c": tp.c, "g0": tp.g0},
                        samples=self.eval_samples(tp.g), samples_initial=self.eval_samples(tp.g0),
                        traces=dict(tp.traces), overlap_trace=trace)


def classifier_angle(world: World, clf: games.Classifier) -> float:
    if world.spec is None or world.dim != 2 or world.num_classes != 2:
        return NAN
    try:
        normal = clf.linear_normal()
    except ValueError:
        return NAN
    if not np.any(normal):
        return NAN
    # the symmetric toy worlds have Bayes normal (1, 1)
    return toy.boundary_angle(normal)


@dataclass
class RunReport:
    results: list
    config_echo: str
    seed: int
    rng_algorithm: str = games.RNG_ALGORITHM

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.results)

    def get(self, scenario: str, seed: int | None = None) -> ScenarioResult:
        for r in self.results:
            if r.scenario == scenario and (seed is None or r.seed == seed):
                return r
        raise KeyError((scenario, seed))

    def csv_text(self) -> str:
        head = ("scenario,seed,status,accuracy,accuracy_without_real,boundary_angle,"
                "overlap_initial,overlap_final,wall_clock_s\n")
        rows = [",".join([r.scenario, str(r.seed), r.status, _num(r.accuracy), _num(r.accuracy_without_real),
                          _num(r.boundary_angle), _num(r.overlap_initial), _num(r.overlap_final),
                          f"{r.wall_clock:.3f}"]) + "\n" for r in self.results]
        return head + "".join(rows)

    def traces_text(self) -> str:
        out = ["scenario,seed,trace,index,value\n"]
        for r in self.results:
            for name in sorted(r.traces):
                out.extend(f"{r.scenario},{r.seed},{name},{i},{_num(v)}\n" for i, v in enumerate(r.traces[name]))
        return "".join(out)

    def text(self) -> str:
        """Human-readable summary; timing is left out so reruns compare byte for byte."""
        lines = [f"seed: {self.seed}", f"rng: {self.rng_algorithm}", ""]
        fmt = "{:<24} {:>5} {:>7} {:>9} {:>14} {:>8} {:>9} {:>9}"
        lines.append(fmt.format("scenario", "seed", "status", "accuracy", "without-real", "angle",
                                "overlap0", "overlap1"))
        for r in self.results:
            lines.append(fmt.format(r.scenario, r.seed, r.status, _num(r.accuracy, 4),
                                    _num(r.accuracy_without_real, 4), _num(r.boundary_angle, 2),
                                    _num(r.overlap_initial, 4), _num(r.overlap_final, 4)))
        failed = [r for r in self.results if r.status != "ok"]
        if failed:
            lines += ["", "failures:"] + [f"  {r.scenario} seed {r.seed}: {r.error}" for r in failed]
        lines += ["", "config:", *("  " + ln for ln in self.config_echo.splitlines())]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for name, text in (("report.csv", self.csv_text()), ("report.txt", self.text()),
                           ("traces.csv", self.traces_text()), ("config.echo", self.config_echo)):
            with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def _num(v: float, digits: int | None = None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "" if digits is None else "-"
    return repr(float(v)) if digits is None else f"{v:.{digits}f}"


def _write_artifacts(cfg: ExperimentConfig, world: World, stem: str, outcome: _Outcome, out_dir: str) -> None:
    save_checkpoint(flatten_stores(outcome.stores), os.path.join(out_dir, stem + ".ckpt"))
    if world.dim == 2:
        raster = toy.rasterize_surface(outcome.classifier, (cfg.raster_min, cfg.raster_max,
                                                            cfg.raster_min, cfg.raster_max), cfg.raster_resolution)
        write_raster_ppm(raster, os.path.join(out_dir, stem + ".surface.ppm"))
    if outcome.samples is not None:
        save_dataset_csv(*outcome.samples, os.path.join(out_dir, stem + ".samples.csv"), world.label_names)
    if outcome.samples_initial is not None:
        save_dataset_csv(*outcome.samples_initial, os.path.join(out_dir, stem + ".samples_initial.csv"),
                         world.label_names)


def load_pretrained(cfg: ExperimentConfig, base_dir: str = ".") -> dict | None:
    if not cfg.checkpoint:
        return None
    return split_stores(load_checkpoint(os.path.join(base_dir, cfg.checkpoint)))


def run_scenarios(cfg: ExperimentConfig, scenarios=None, out_dir: str | None = None,
                  base_dir: str = ".", repeats: int = 1) -> RunReport:
    """Run each scenario for seeds ``cfg.seed .. cfg.seed + repeats - 1``.

    Repeat ``r`` uses training seed ``cfg.seed + r`` and data seed
    ``cfg.data_seed + r``; the test set is shared. A failing scenario is
    recorded and the rest still run.
    """
    scenarios = [cfg.scenario] if scenarios is None else list(scenarios)
    pretrained = load_pretrained(cfg, base_dir)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    results = []
    for r in range(repeats):
        seed = cfg.seed + r
        world = make_world(cfg, cfg.data_seed + r, base_dir)
        session = _Session(cfg, world, seed, pretrained)
        for scenario in scenarios:
            res = ScenarioResult(scenario, seed)
            start = time.perf_counter()
            try:
                out = session.run(scenario)
                res.accuracy = out.classifier.accuracy(world.x_test, world.y_test)
                res.accuracy_without_real = out.accuracy_without_real
                res.boundary_angle = classifier_angle(world, out.classifier)
                res.traces = {k: list(v) for k, v in out.traces.items()}
                if out.overlap_trace:
                    res.traces["overlap"] = list(out.overlap_trace)
                    res.overlap_initial, res.overlap_final = out.overlap_trace[0], session.overlap(out.stores["g"])
                elif out.samples is not None and world.spec is not None:
                    res.overlap_final = toy.overlap_score(out.samples[0], world.spec, cfg.tau)
                if out_dir is not None:
                    _write_artifacts(cfg, world, f"{scenario}-s{seed}", out, out_dir)
            except (games.TrainingDiverged, ValueError, ArithmeticError, OSError) as exc:
                res.status, res.error = "failed", f"{type(exc).__name__}: {exc}"
            res.wall_clock = time.perf_counter() - start
            results.append(res)
    report = RunReport(results, cfg.echo(), cfg.seed)
    if out_dir is not None:
        report.write(out_dir)
    return report


# --- comparison table ---------------------------------------------------------------

@dataclass
class OrderingCheck:
    baseline_angle: float
    three_player_angle: float
    accuracy_gaps: list  # three-player minus baseline, per seed
    baseline_accuracies: list

    @property
    def angle_ok(self) -> bool:
        if math.isnan(self.baseline_angle) or math.isnan(self.three_player_angle):
            return True  # nonlinear classifier or unknown Bayes normal: accuracy alone decides
        return self.three_player_angle <= self.baseline_angle

    @property
    def accuracy_ok(self) -> bool:
        return all(g >= -ACCURACY_TOLERANCE for g in self.accuracy_gaps)

    @property
    def baseline_ok(self) -> bool:
        return all(a >= BASELINE_FLOOR for a in self.baseline_accuracies)

    @property
    def holds(self) -> bool:
        return self.angle_ok and self.accuracy_ok


def _median(values) -> float:
    values = [v for v in values if not math.isnan(v)]
    return statistics.median(values) if values else NAN


def ordering_check(report: RunReport) -> OrderingCheck:
    seeds = sorted({r.seed for r in report.results})
    base = [report.get("baseline", s) for s in seeds]
    three = [report.get("three-player", s) for s in seeds]
    if any(r.status != "ok" for r in base + three):
        raise ValueError("ordering check needs completed baseline and three-player runs")
    return OrderingCheck(_median([r.boundary_angle for r in base]), _median([r.boundary_angle for r in three]),
                         [t.accuracy - b.accuracy for b, t in zip(base, three)], [b.accuracy for b in base])


def comparison_table(report: RunReport) -> str:
    """Accuracy table in the layout of the usual method comparison, medians over seeds."""

    def med(scenario, attr="accuracy"):
        rows = [r for r in report.results if r.scenario == scenario and r.status == "ok"]
        return _num(_median([getattr(r, attr) for r in rows]), 4) if rows else "failed"

    n = len({r.seed for r in report.results})
    fmt = "{:<12} {:>18} {:>15} {:>12}"
    lines = [f"toy comparison, median over {n} seed(s); test accuracy", "",
             fmt.format("method", "without real data", "with real data", "angle (deg)"),
             fmt.format("Baseline", "-", med("baseline"), med("baseline", "boundary_angle")),
             fmt.format("cGAN", med("cgan"), med("cgan-augmented"), med("cgan-augmented", "boundary_angle")),
             fmt.format("ACGAN", "-", med("acgan"), med("acgan", "boundary_angle")),
             fmt.format("Threeplayer", med("three-player", "accuracy_without_real"), med("three-player"),
                        med("three-player", "boundary_angle")), ""]
    try:
        chk = ordering_check(report)
    except (ValueError, KeyError) as exc:
        lines.append(f"ordering check: not evaluated ({exc})")
    else:
        lines.append(f"median angle: three-player {_num(chk.three_player_angle, 2)} vs baseline "
                     f"{_num(chk.baseline_angle, 2)} -> {'ok' if chk.angle_ok else 'VIOLATED'}")
        lines.append(f"worst accuracy gap (three-player - baseline): {min(chk.accuracy_gaps):+.4f} "
                     f"(tolerance -{ACCURACY_TOLERANCE}) -> {'ok' if chk.accuracy_ok else 'VIOLATED'}")
        lines.append(f"ordering three-player >= baseline: {'holds' if chk.holds else 'does not hold'}")
    return "\n".join(lines) + "\n"


def run_comparison(cfg: ExperimentConfig, out_dir: str | None = None, base_dir: str = ".") -> RunReport:
    report = run_scenarios(cfg, COMPARE_SCENARIOS, out_dir, base_dir, cfg.repeats)
    if out_dir is not None:
        with open(os.path.join(out_dir, "compare.txt"), "w", encoding="utf-8") as fh:
            fh.write(comparison_table(report))
    return report
