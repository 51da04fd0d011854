"""Inference engine: wires configured components and drives run modes.

Modes: dry (resources preview, zero model executions), infer, continue
(resume from the latest checkpoint), test (model clone/move/reseed
checks), synthesize (exact predictions plus noisy observations), report
(diagnostics tables), best (re-execute the best trajectory in an
explicit directory) and forecast (posterior propagation or sequential
updating from a past inference).

Random-stream discipline: every draw derives from the hierarchical seed
path (seed, batch, chain, attempt, replicate, particle, step), so
results are bit-identical for any worker count and across
kill-and-continue.
"""

from __future__ import annotations

import math
import shutil
import time as _time
from typing import Callable, Sequence

import numpy as np

from uqengine.aggregation import ReplicateSet, replicates_loglik, replicates_priorities
from uqengine.config import Config, ConfigError, distance_order
from uqengine.core import LabeledValues, Sandbox, SeedPath, rng_for
from uqengine.distributions import (
    Distribution,
    Empirical,
    Tensor,
    univariate_from_spec,
)
from uqengine.executors import EnsembleExecutor, PoolExecutor, TaskFailure
from uqengine.inference import (
    IndependentNormalError,
    LikelihoodEstimate,
    direct_loglik,
    norm_distance,
    pf_estimate,
)
from uqengine.inference.adaptivity import adapt_particles
from uqengine.io import Dataset, InferenceStore, Status, synthesize
from uqengine.io.diagnostics import ess_and_thinning
from uqengine.io.metrics import model_metrics
from uqengine.io.residuals import residuals_and_qq
from uqengine.models import External, Randomwalk, Straightwalk
from uqengine.models.base import Model, ModelState, initial_resolve
from uqengine.models.testing import run_model_checks
from uqengine.samplers import (
    EvalRequest,
    MetropolisSampler,
    MonteCarloSampler,
    SabcSampler,
    StretchSampler,
    mc_propagate,
)

__all__ = ["Engine", "EngineError", "CheckFailure"]

# seed-path level for the smoothed-trajectory draw of an accepted sample
_SMOOTH_LEVEL = 0x7FFFFFFD


class EngineError(RuntimeError):
    """Runtime failure while executing a mode."""


class CheckFailure(RuntimeError):
    """A validation-style mode (test) found failing checks."""


class Engine:
    def __init__(self, config: Config, serial: bool = False):
        self.config = config
        self.serial = bool(serial)
        self.outputdir = config.resolve_path(config.outputdir)
        self.sandboxdir = config.resolve_path(config.sandboxdir)

    # ------------------------------------------------------------------
    # component builders
    # ------------------------------------------------------------------

    def workers(self, component: str) -> int:
        if self.serial:
            return 0
        return self.config.worker_counts().get(component, 0)

    def build_prior(self) -> Distribution:
        if not self.config.prior:
            raise ConfigError("no prior: set prior.<label> entries")
        return Tensor(
            {label: univariate_from_spec(kind, args)
             for label, (kind, args) in self.config.prior.items()}
        )

    def build_initial(self):
        if not self.config.initial:
            return None
        specs = self.config.initial
        if all(kind == "delta" for kind, _ in specs.values()):
            return LabeledValues(list(specs), [args[0] for _, args in specs.values()])
        return Tensor(
            {label: univariate_from_spec(kind, args) for label, (kind, args) in specs.items()}
        )

    def model_factory(self) -> Callable[[], Model]:
        options = self.config.model
        method = options.get("method")
        if method is None:
            raise ConfigError("no model: set model.method")
        statefiles = options.get("statefiles")
        templatedir = options.get("templatedir")
        templatedir = str(self.config.resolve_path(templatedir)) if templatedir else None

        def make() -> Model:
            if method == "Randomwalk":
                model = Randomwalk(dt=options.get("dt", 0.1))
            elif method == "Straightwalk":
                model = Straightwalk()
            else:
                model = External(options["command"], direct=options.get("direct", False))
            model.configure(statefiles=statefiles, templatedir=templatedir)
            return model

        return make

    def load_datasets(self) -> dict[str, Dataset]:
        out = {}
        for name, file in self.config.datasets.items():
            out[name] = Dataset.load(self.config.resolve_path(file))
        return out

    def build_error(self, labels: Sequence[str]):
        if not self.config.error:
            return None
        scale_raw = self.config.error.get("scale")
        if scale_raw is None:
            raise ConfigError("error.method given without error.scale")
        try:
            scale: str | float = float(scale_raw)
        except ValueError:
            scale = scale_raw  # a parameter label
        return IndependentNormalError(tuple(labels), scale)

    def exact_parameters(self) -> LabeledValues | None:
        if not self.config.exact:
            return None
        return LabeledValues.from_dict(self.config.exact)

    # ------------------------------------------------------------------
    # resources
    # ------------------------------------------------------------------

    def resources(self) -> tuple[list[tuple[str, str, int]], int]:
        """(component, method, workers) rows and the cumulative worker count."""
        rows = []
        rows.append(("sampler", self.config.sampler.get("method", "-"), self.workers("sampler")))
        if self.config.likelihood:
            rows.append(("likelihood", self.config.likelihood["method"], self.workers("likelihood")))
        if self.config.distance:
            rows.append(("distance", self.config.distance["method"], self.workers("likelihood")))
        rows.append(("model", self.config.model.get("method", "-"), self.workers("model")))
        total = 1
        for _, _, workers in reversed(rows):
            total = workers * total + 1 if workers > 0 else total
        return rows, total

    def evaluations_preview(self) -> int:
        samples = self.config.sampler.get("samples", 0)
        chains = self.config.sampler.get("chains", self.config.sampler.get("batchsize", 1))
        particles = self.config.likelihood.get("particles", 1) if self.config.likelihood else 1
        replicates = max(len(self.config.datasets), 1)
        return samples * chains * particles * replicates

    def resources_text(self) -> str:
        rows, total = self.resources()
        lines = [f"{'component':<12} {'method':<12} {'workers':>7}"]
        for component, method, workers in rows:
            lines.append(f"{component:<12} {method:<12} {workers:>7}")
        lines.append(f"cumulative workers: {total}")
        lines.append(f"anticipated model evaluations (upper bound): {self.evaluations_preview()}")
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------
    # run modes
    # ------------------------------------------------------------------

    def run(self, mode: str) -> dict:
        modes = {
            "dry": self.run_dry,
            "infer": self.run_infer,
            "continue": self.run_continue,
            "test": self.run_test,
            "synthesize": self.run_synthesize,
            "report": self.run_report,
            "best": self.run_best,
            "forecast": self.run_forecast,
        }
        if mode not in modes:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {sorted(modes)}")
        return modes[mode]()

    def run_dry(self) -> dict:
        text = self.resources_text()
        self.outputdir.mkdir(parents=True, exist_ok=True)
        _, total = self.resources()
        (self.outputdir / "workers.txt").write_text(f"{total}\n")
        print(text, end="")
        return {"mode": "dry", "workers": total, "resources": text}

    # -- inference -----------------------------------------------------------

    def _build_sampler(self, prior: Distribution, path: SeedPath):
        options = self.config.sampler
        method = options["method"]
        reset_after = options.get("reset", 20)
        if method == "EMCEE":
            return StretchSampler(
                prior,
                options["chains"],
                path,
                stretch=options.get("stretch", 2.0),
                reset_after=reset_after,
            )
        if method == "MCMC":
            return MetropolisSampler(prior, options["chains"], path, reset_after=reset_after)
        if method == "SABC":
            return SabcSampler(
                prior,
                options["batchsize"],
                path,
                kappa=options.get("kappa", 0.9),
                redraw_fraction=options.get("redraw", 0.25),
            )
        if method == "MC":
            return MonteCarloSampler(prior, options["chains"], path)
        raise ConfigError(f"unknown sampler method {method!r}")

    def _chain_count(self) -> int:
        return self.config.sampler.get("chains", self.config.sampler.get("batchsize"))

    def _batch_count(self) -> int:
        options = self.config.sampler
        if options["method"] == "SABC":
            return options.get("batches", 50)
        samples = options.get("samples")
        if samples is None:
            raise ConfigError("sampler requires sampler.samples")
        return max(int(math.ceil(samples / self._chain_count())), 1)

    def _build_evaluator(self, datasets, error, initial, state_samples=None):
        return _Evaluator(self, datasets, error, initial, state_samples=state_samples)

    def run_infer(self) -> dict:
        return self._infer(resume=False)

    def run_continue(self) -> dict:
        return self._infer(resume=True)

    def _infer(self, resume: bool) -> dict:
        config = self.config
        datasets = self.load_datasets()
        sequential = bool(config.forecast.get("pastdir")) and bool(datasets)
        state_samples = None
        if config.sampler["method"] != "MC" or sequential:
            if not datasets:
                raise ConfigError("inference requires a dataset (dataset.file)")
        if sequential:
            past = Status(config.resolve_path(config.forecast["pastdir"]))
            state_samples = _load_state_samples(past)
            prior = Empirical([theta for theta, _ in state_samples])
            initial = None
        else:
            prior = self.build_prior()
            initial = self.build_initial()
        labels = next(iter(datasets.values())).labels if datasets else ()
        error = self.build_error(labels)
        if config.likelihood and error is None:
            raise ConfigError("a likelihood requires an error model (error.method)")

        path = SeedPath((config.seed,))
        sampler = self._build_sampler(prior, path)
        evaluator = self._build_evaluator(datasets, error, initial, state_samples)
        store = InferenceStore(self.outputdir, checkpoint_interval=config.checkpoint)
        batches = self._batch_count()
        lock = config.likelihood.get("lock") if config.likelihood else None

        best: dict | None = None
        predictions_now: dict[int, dict | None] = {}
        states_now: dict[int, tuple[dict, ModelState] | None] = {}
        start_batch = 1

        if resume:
            status = Status(self.outputdir)
            pickup = status.pickup()
            if pickup is None:
                raise EngineError(
                    "nothing to continue from: no pickup record in the output directory"
                )
            sampler.load_state_dict(pickup["sampler"])
            evaluator.particles.update(pickup.get("particles", {}))
            evaluator.activated = bool(pickup.get("activated", False))
            best = pickup.get("best")
            predictions_now = pickup.get("predictions", {})
            states_now = pickup.get("states", {})
            start_batch = pickup["batch"] + 1
            store.truncate_after(pickup["batch"])
        else:
            _, total = self.resources()
            store.begin(specification=_config_snapshot(config), workers=total)
            if config.verbosity >= 1:
                print(self.resources_text(), end="")
            evaluator.locked = False
            started = _time.perf_counter()
            record = sampler.init(evaluator)
            best, bundle = self._process_batch(
                record, evaluator, best, predictions_now, states_now,
                wall=_time.perf_counter() - started,
            )
            bundle["pickup"] = self._pickup(record.batch, sampler, evaluator, best,
                                            predictions_now, states_now)
            store.append(bundle)
            store.checkpoint()

        for batch in range(start_batch, batches + 1):
            evaluator.locked = lock is not None and batch > lock
            started = _time.perf_counter()
            record = sampler.step(batch, evaluator)
            best, bundle = self._process_batch(
                record, evaluator, best, predictions_now, states_now,
                wall=_time.perf_counter() - started,
            )
            bundle["pickup"] = self._pickup(batch, sampler, evaluator, best,
                                            predictions_now, states_now)
            if batch == batches and config.states:
                bundle["states"] = [
                    {
                        "parameters": states_now[k][0],
                        "state": states_now[k][1],
                    }
                    if states_now.get(k) is not None
                    else None
                    for k in range(len(record.chains))
                ]
            store.append(bundle)
            store.checkpoint(force=batch == batches)
            if config.trace == "none":
                shutil.rmtree(self.sandboxdir / str(batch), ignore_errors=True)

        if best is not None:
            store.write_best(best, best.get("trajectory"))
        if config.trace == "none":
            shutil.rmtree(self.sandboxdir, ignore_errors=True)
        return {"mode": "continue" if resume else "infer", "batches": batches,
                "outputdir": str(self.outputdir), "best": best}

    def _process_batch(self, record, evaluator, best, predictions_now, states_now, wall):
        config = self.config
        for k, (chain, accepted) in enumerate(zip(record.chains, record.accepted)):
            if not accepted or chain.estimate is None:
                continue
            estimate = chain.estimate
            prediction = None
            if estimate.trajectories is not None and estimate.trajectories.snapshots:
                trajectories = estimate.trajectories
                rng = rng_for([config.seed, record.batch, k, _SMOOTH_LEVEL])
                pick = int(rng.integers(trajectories.particles))
                values = trajectories.trajectory(pick)
                prediction = {
                    "times": list(trajectories.times),
                    "labels": list(trajectories.labels),
                    "values": values.tolist(),
                }
                initial_values = trajectories.initial_of(pick)
                if initial_values is not None:
                    record.infos[k]["initial"] = dict(
                        zip(trajectories.initial_labels, initial_values.tolist())
                    )
                if estimate.states is not None:
                    states_now[k] = (chain.parameters.as_dict(), estimate.states[pick])
            elif estimate.states is not None:
                states_now[k] = (chain.parameters.as_dict(), estimate.states[0])
            predictions_now[k] = prediction
            logpost = chain.logpost
            if prediction is not None and (
                best is None or (math.isfinite(logpost) and logpost > best["logpost"])
            ):
                best = {
                    "batch": record.batch,
                    "chain": k,
                    "parameters": chain.parameters.as_dict(),
                    "logprior": chain.logprior,
                    "loglik": chain.loglik,
                    "logpost": logpost,
                    "lineage": pick,
                    "particles": estimate.particles,
                    "trajectory": prediction,
                }
        timings = None
        if "performance" in config.informative:
            timings = {"wall": wall}
        bundle = {
            "batch": record.batch,
            "chains": [
                {
                    "parameters": c.parameters.as_dict(),
                    "logprior": c.logprior,
                    "loglik": c.loglik,
                    "logpost": c.logpost,
                    "accepted": a,
                }
                for c, a in zip(record.chains, record.accepted)
            ],
            "predictions": [
                predictions_now.get(k) if record.accepted[k] else None
                for k in range(len(record.chains))
            ],
            "infos": record.infos,
            "timings": timings,
        }
        return best, bundle

    def _pickup(self, batch, sampler, evaluator, best, predictions_now, states_now) -> dict:
        return {
            "batch": batch,
            "sampler": sampler.state_dict(),
            "particles": dict(evaluator.particles),
            "activated": evaluator.activated,
            "best": best,
            "predictions": dict(predictions_now),
            "states": dict(states_now),
        }

    # -- model testing ------------------------------------------------------------

    def _test_times(self) -> list[float]:
        if self.config.test.get("times"):
            return list(self.config.test["times"])
        datasets = self.load_datasets()
        if datasets:
            return list(next(iter(datasets.values())).times)
        if self.config.synthesize.get("snapshots"):
            return list(self.config.synthesize["snapshots"])
        raise ConfigError("model testing needs test.times, a dataset, or synthesize.snapshots")

    def _test_parameters(self) -> LabeledValues:
        exact = self.exact_parameters()
        if exact is not None:
            return exact
        prior = self.build_prior()
        return prior.draw(rng_for([self.config.seed, 0]))

    def run_test(self) -> dict:
        factory = self.model_factory()
        parameters = self._test_parameters()
        initial, _ = initial_resolve(
            self.build_initial(), parameters, rng_for([self.config.seed, 1])
        )
        sandbox = Sandbox(self.sandboxdir / "test")
        reports = run_model_checks(
            factory, initial, parameters, self._test_times(), sandbox, seed=self.config.seed
        )
        for report in reports:
            status = "passed" if report.passed else "FAILED"
            print(f"model {report.name} test: {status}")
            for line in report.details[:5]:
                print(f"  {line}")
        shutil.rmtree(self.sandboxdir / "test", ignore_errors=True)
        if not all(r.passed for r in reports):
            raise CheckFailure(
                "model checks failed: " + ", ".join(r.name for r in reports if not r.passed)
            )
        return {"mode": "test", "reports": [(r.name, r.passed) for r in reports]}

    # -- synthesis ------------------------------------------------------------

    def run_synthesize(self) -> dict:
        snapshots = self.config.synthesize.get("snapshots")
        if not snapshots:
            datasets = self.load_datasets()
            if datasets:
                snapshots = list(next(iter(datasets.values())).times)
            else:
                raise ConfigError("synthesis needs synthesize.snapshots or a dataset")
        parameters = self._test_parameters()
        initial, _ = initial_resolve(
            self.build_initial(), parameters, rng_for([self.config.seed, 1])
        )
        error = self.build_error(self._synthesis_labels())
        exact, observed = synthesize(
            self.model_factory(),
            parameters,
            snapshots,
            error=error,
            initial=initial,
            seed=self.config.seed,
            sandbox=Sandbox(self.sandboxdir / "synthesize"),
        )
        target = self.outputdir / "datasets"
        exact.write(target / "predictions.dat")
        written = {"predictions": str(target / "predictions.dat")}
        if observed is not None:
            observed.write(target / "dataset.dat")
            written["dataset"] = str(target / "dataset.dat")
        shutil.rmtree(self.sandboxdir / "synthesize", ignore_errors=True)
        return {"mode": "synthesize", "parameters": parameters.as_dict(), **written}

    def _synthesis_labels(self) -> tuple[str, ...]:
        datasets = self.load_datasets()
        if datasets:
            return next(iter(datasets.values())).labels
        # fall back to the built-in walk output label
        return ("position",)

    # -- reporting ------------------------------------------------------------

    def burnin(self, batches: int) -> int:
        lock = self.config.likelihood.get("lock") if self.config.likelihood else None
        return max(batches // 2, lock or 0)

    def run_report(self) -> dict:
        status = Status(self.outputdir)
        if not status.batches:
            raise EngineError(f"no inference output found in {self.outputdir}")
        batches = max(status.batches)
        burn = self.burnin(batches)
        table = status.parameters
        retained = table[table["batch"] > burn]
        labels = status.labels

        chains_array = status.chains_array(burn=burn)
        try:
            ess = ess_and_thinning([chains_array[i] for i in range(chains_array.shape[0])])
        except ValueError:
            # too few retained batches for an autocorrelation estimate
            ess = None
        acceptance = float(retained["accepted"].mean()) if len(retained) else 0.0

        metrics: dict[str, float] = {}
        best = status.best()
        datasets = self.load_datasets()
        if best is not None and datasets:
            dataset = next(iter(datasets.values()))
            finite = retained[np.isfinite(retained["loglik"])]
            metrics = model_metrics(
                best["loglik"], k=len(labels), n=dataset.cells(),
                posterior_logliks=finite["loglik"].tolist(),
            )

        lines = [
            f"batches: {batches}",
            f"burn-in cutoff: {burn}",
            f"retained samples: {len(retained)}",
            f"acceptance rate: {acceptance:.4f}",
        ]
        if ess is not None:
            lines.append(f"effective sample size: {ess.ess:.1f}")
            lines.append(f"thinning period: {ess.thin}")
        for label in labels:
            column = retained[label]
            unit = f" [{self.config.units[label]}]" if label in self.config.units else ""
            lines.append(
                f"posterior {label}{unit}: mean {column.mean():.6g}, std {column.std():.6g}, "
                f"CI95 [{column.quantile(0.025):.6g}, {column.quantile(0.975):.6g}]"
            )
        exact = self.exact_parameters()
        if exact is not None:
            for label in exact.labels:
                lines.append(f"exact {label}: {exact[label]:.6g}")
        for name, value in metrics.items():
            lines.append(f"{name}: {value:.6g}")
        if best is not None:
            lines.append(f"best logpost: {best['logpost']:.6g} "
                         f"(batch {best['batch']}, chain {best['chain']})")

        report = "\n".join(lines) + "\n"
        store = InferenceStore(self.outputdir)
        store.write_diagnostics("report.txt", report)
        summary = retained[["batch", "chain", *labels, "loglik", "logpost"]]
        store.write_diagnostics("posterior.csv", summary.to_csv(index=False))

        qq_slope = None
        error = self.build_error(next(iter(datasets.values())).labels) if datasets else None
        if datasets and error is not None:
            qq_slope = self._report_residuals(status, retained, next(iter(datasets.values())), error, store)
        print(report, end="")
        return {
            "mode": "report",
            "batches": batches,
            "burnin": burn,
            "acceptance": acceptance,
            "ess": ess.ess if ess is not None else None,
            "thin": ess.thin if ess is not None else None,
            "metrics": metrics,
            "qq_slope": qq_slope,
            "report": report,
        }

    def _report_residuals(self, status, retained, dataset, error, store, cap: int = 500):
        predictions = []
        parameters = []
        for _, row in retained.iterrows():
            prediction = status.prediction(int(row["batch"]), int(row["chain"]))
            if prediction is None or "times" not in prediction:
                continue
            predictions.append(prediction)
            parameters.append(LabeledValues(tuple(status.labels),
                                            tuple(row[l] for l in status.labels)))
            if len(predictions) >= cap:
                break
        if not predictions:
            return None
        report = residuals_and_qq(dataset, predictions, error, parameters)
        rows = ["theory,empirical"]
        step = max(len(report.qq_theory) // 512, 1)
        for a, b in zip(report.qq_theory[::step], report.qq_empirical[::step]):
            rows.append(f"{a},{b}")
        store.write_diagnostics("qq.csv", "\n".join(rows) + "\n")
        return report.qq_slope()

    # -- best trajectory ------------------------------------------------------------

    def run_best(self) -> dict:
        status = Status(self.outputdir)
        best = status.best()
        if best is None:
            raise EngineError("no best record: run the inference first")
        datasets = self.load_datasets()
        if not datasets:
            raise ConfigError("best-trajectory re-execution needs the dataset")
        dataset = next(iter(datasets.values()))
        error = self.build_error(dataset.labels)
        parameters = LabeledValues.from_dict(best["parameters"])
        initial = self.build_initial()
        trajectorydir = self.outputdir / "trajectory"
        sandbox = Sandbox(trajectorydir / "sandbox")
        path = SeedPath((self.config.seed, best["batch"], best["chain"], 0, 0))
        if self.config.likelihood and self.config.likelihood["method"] == "PF":
            estimate = pf_estimate(
                self.model_factory(), parameters, dataset, error,
                best["particles"], path, initial=initial, sandbox=sandbox,
                smoothing=True,
            )
            values = estimate.trajectories.trajectory(best["lineage"])
        else:
            estimate = direct_loglik(
                self.model_factory(), parameters, dataset, error, path,
                initial=initial, sandbox=sandbox,
            )
            values = estimate.trajectories.trajectory(0)
        trajectorydir.mkdir(parents=True, exist_ok=True)
        lines = ["time," + ",".join(dataset.labels)]
        for t, row in zip(dataset.times, values):
            lines.append(f"{t}," + ",".join(str(v) for v in row))
        (trajectorydir / "trajectory.csv").write_text("\n".join(lines) + "\n")
        return {
            "mode": "best",
            "trajectorydir": str(trajectorydir),
            "loglik": estimate.loglik,
            "values": values.tolist(),
            "times": dataset.times.tolist(),
        }

    # -- forecasting ------------------------------------------------------------

    def run_forecast(self) -> dict:
        pastdir = self.config.forecast.get("pastdir")
        if not pastdir:
            raise ConfigError("forecast needs forecast.pastdir")
        datasets = self.load_datasets()
        if datasets:
            # sequential Bayesian updating: new dataset, parameters kept
            return self._infer(resume=False)
        times = self.config.forecast.get("timeset")
        if not times:
            raise ConfigError("forecast needs forecast.timeset (future times)")
        past = Status(self.config.resolve_path(pastdir))
        samples = _load_state_samples(past)
        forecast = mc_propagate(
            samples,
            self.model_factory(),
            times,
            seed=self.config.seed,
            draws=self.config.forecast.get("draws"),
            sandbox=Sandbox(self.sandboxdir / "forecast"),
        )
        shutil.rmtree(self.sandboxdir / "forecast", ignore_errors=True)
        target = self.outputdir / "forecast"
        target.mkdir(parents=True, exist_ok=True)
        values = forecast["values"]  # (draws, times, labels)
        lines = ["time,label,mean,std,q025,q975"]
        for i, t in enumerate(forecast["times"]):
            for j, label in enumerate(forecast["labels"]):
                column = values[:, i, j]
                lines.append(
                    f"{t},{label},{column.mean()},{column.std(ddof=1) if column.size > 1 else 0.0},"
                    f"{np.quantile(column, 0.025)},{np.quantile(column, 0.975)}"
                )
        (target / "forecast.csv").write_text("\n".join(lines) + "\n")
        return {
            "mode": "forecast",
            "draws": int(values.shape[0]),
            "times": forecast["times"],
            "labels": forecast["labels"],
            "values": values,
            "outputdir": str(target),
        }


def _config_snapshot(config: Config) -> dict:
    return {
        "seed": config.seed,
        "sampler": dict(config.sampler),
        "likelihood": dict(config.likelihood),
        "distance": dict(config.distance),
        "model": {k: v for k, v in config.model.items() if k != "statefiles"}
        | ({"statefiles": list(config.model["statefiles"])} if "statefiles" in config.model else {}),
        "prior": {l: [kind, list(args)] for l, (kind, args) in config.prior.items()},
        "initial": {l: [kind, list(args)] for l, (kind, args) in config.initial.items()},
        "error": dict(config.error),
        "datasets": dict(config.datasets),
        "states": config.states,
        "checkpoint": config.checkpoint,
    }


def _load_state_samples(past: Status) -> list[tuple[LabeledValues, ModelState]]:
    _, states = past.final_states()
    samples = []
    for entry in states:
        if entry is None:
            continue
        samples.append((LabeledValues.from_dict(entry["parameters"]), entry["state"]))
    if not samples:
        raise EngineError("the past inference stored no usable model states")
    return samples


class _Evaluator:
    """Maps sampler proposals to likelihood or distance estimates.

    Owns the per-chain adaptive particle counts (frozen once locked) and
    submits evaluations as independent pool tasks keyed by chain index.
    """

    def __init__(self, engine: Engine, datasets, error, initial, state_samples=None):
        self.engine = engine
        config = engine.config
        self.config = config
        self.datasets = datasets
        self.error = error
        self.initial = initial
        self.state_samples = state_samples
        self.pool = PoolExecutor(workers=engine.workers("sampler"))
        self.likelihood_workers = engine.workers("likelihood")
        self.locked = False

        self.kind = "none"
        if config.likelihood:
            self.kind = config.likelihood["method"]  # PF | Direct
        elif config.distance:
            self.kind = "distance"
        self.stochastic = self.kind == "PF"
        self.adaptive = bool(config.likelihood.get("adaptive", True)) if self.kind == "PF" else False
        self.max_particles = int(config.likelihood.get("particles", 64)) if config.likelihood else 1
        self.min_particles = int(config.likelihood.get("min_particles", 4)) if config.likelihood else 1
        self.min_particles = min(self.min_particles, self.max_particles)
        # per-snapshot relative-standard-error target, calibrated so the
        # total log-likelihood noise stays near unity at snapshot counts
        # around ten: pseudo-marginal chains stop mixing when the
        # estimator noise grows much beyond that
        self.target = float(config.likelihood.get("accuracy", 0.35)) if config.likelihood else 0.35
        self.margin = float(config.likelihood.get("margin", 2.0)) if config.likelihood else 2.0
        self.threshold = float(config.likelihood.get("threshold", -2.0)) if config.likelihood else -2.0
        self.smoothing = bool(config.likelihood.get("smoothing", True)) if config.likelihood else True
        # particle counts keyed by "chain:replicate"
        self.particles: dict[str, int] = {}
        # adaptivity activates once any fitscore in the history crosses
        # the threshold: the sampler is out of its initialization phase
        self.activated = False

    def _particles_for(self, chain: int, name: str) -> int:
        key = f"{chain}:{name}"
        if key not in self.particles:
            self.particles[key] = self.min_particles if self.adaptive else self.max_particles
        return self.particles[key]

    def evaluate(self, requests: Sequence[EvalRequest], batch: int) -> list[LikelihoodEstimate]:
        if self.kind == "none":
            return [LikelihoodEstimate(loglik=0.0, particles=0) for _ in requests]
        names = sorted(self.datasets.keys())
        counts = {
            (r.chain, n): self._particles_for(r.chain, n) for r in requests for n in names
        }
        tasks = [self._make_task(request, batch, names, counts) for request in requests]
        results = self.pool.map(tasks)
        estimates: list[LikelihoodEstimate] = []
        for request, result in zip(requests, results):
            if isinstance(result, TaskFailure):
                estimates.append(LikelihoodEstimate.failure())
                continue
            estimates.append(result)
            if self.adaptive and result.per_replicate:
                for name, sub in result.per_replicate.items():
                    if sub.fitscore is None or sub.accuracy is None:
                        continue
                    if sub.fitscore >= self.threshold:
                        self.activated = True
                    key = f"{request.chain}:{name}"
                    self.particles[key] = adapt_particles(
                        sub.fitscore,
                        sub.accuracy,
                        counts[(request.chain, name)],
                        self.min_particles,
                        self.max_particles,
                        target=self.target,
                        margin=self.margin,
                        locked=self.locked,
                        threshold=(-math.inf if self.activated else self.threshold),
                    )
        return estimates

    def _make_task(self, request: EvalRequest, batch: int, names, counts):
        engine = self.engine
        config = self.config
        factory = engine.model_factory()
        error = self.error
        initial = self.initial
        if self.state_samples is not None and "source_index" in request.meta:
            initial = self.state_samples[request.meta["source_index"]][1]
        kind = self.kind
        smoothing = self.smoothing
        capture = config.states
        likelihood_workers = self.likelihood_workers
        datasets = self.datasets
        seed = config.seed
        sandbox_root = engine.sandboxdir
        chain, attempt = request.chain, request.attempt
        parameters = request.parameters
        # longest datasets (weighted by particles) evaluate first
        ordered = replicates_priorities(
            ReplicateSet(datasets),
            {n: counts[(chain, n)] for n in names},
        )

        def task() -> LikelihoodEstimate:
            per: dict[str, LikelihoodEstimate] = {}
            for name in ordered:
                replicate_index = names.index(name)
                path = SeedPath((seed, batch, chain, attempt, replicate_index))
                sandbox = Sandbox(sandbox_root, (batch, chain, attempt, replicate_index))
                if kind == "PF":
                    backend = (
                        EnsembleExecutor(workers=likelihood_workers)
                        if likelihood_workers > 0
                        else None
                    )
                    per[name] = pf_estimate(
                        factory,
                        parameters,
                        datasets[name],
                        error,
                        counts[(chain, name)],
                        path,
                        initial=initial,
                        backend=backend,
                        sandbox=sandbox,
                        smoothing=smoothing,
                        capture_states=capture,
                    )
                elif kind == "Direct":
                    per[name] = direct_loglik(
                        factory,
                        parameters,
                        datasets[name],
                        error,
                        path,
                        initial=initial,
                        sandbox=sandbox,
                        capture_states=capture,
                    )
                else:  # distance
                    per[name] = _distance_estimate(
                        factory, parameters, datasets[name], error, path, sandbox,
                        distance_order(config), initial=initial,
                    )
            if len(per) == 1:
                estimate = next(iter(per.values()))
                estimate.per_replicate = per
                return estimate
            total, _ = replicates_loglik(per)
            return LikelihoodEstimate(
                loglik=total,
                failed=math.isnan(total),
                per_replicate=per,
                particles=sum(e.particles or 0 for e in per.values()),
            )

        return task


# seed-path level for observation draws in distance evaluations
_OBSERVE_LEVEL = 0x7FFFFFFE


def _distance_estimate(
    factory, parameters, dataset, error, path: SeedPath, sandbox, order, initial=None
) -> LikelihoodEstimate:
    """Simulate one trajectory, apply the error (if any), measure the distance.

    The distance rides in ``loglik`` negated so larger stays better.
    """
    model = factory()
    model.place(sandbox.descend(0) if sandbox is not None else None)
    values, _ = initial_resolve(initial, parameters, rng_for([*path, 0, 0]))
    model.reseed(path.spawn(0, 0))
    model.init(values, parameters)
    outputs = []
    try:
        for step, (time, _) in enumerate(dataset.rows(), start=1):
            model.reseed(path.spawn(0, step))
            out = model.run(time)
            if out is None:
                return LikelihoodEstimate.failure(particles=1)
            if error is not None:
                observed = error(out.values, parameters).draw(
                    rng_for([*path, _OBSERVE_LEVEL, step])
                )
                out = type(out)(out.time, observed)
            outputs.append(out)
    finally:
        model.exit()
    distance = norm_distance(dataset, outputs, order)
    return LikelihoodEstimate(loglik=-distance, particles=1)
