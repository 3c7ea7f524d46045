"""Deterministic discrete-event simulation of one federated training run.

Virtual time advances through a min-heap of events ordered by (fire_at,
sequence number), so ties resolve in scheduling order and runs with the same
config and seed replay identically. Event kinds:

  client_completed  a dispatched client's update arrives (payload: update)
  dispatch          a buffered-aggregation refill slot opens (no payload)
  aux_deadline      a round's straggler-folding window closes (payload: round)
  eval_tick         evaluate the served model (no payload)

The engine owns the wall-clock-free mechanics: client busy bookkeeping,
latency sampling, local training at dispatch, server optimizer application,
the update budget, and evaluation cadence. Round semantics live in the
drivers (see algorithms).

Client computation is charged for work actually performed: the latency
factors are drawn first (the per-round time limit needs them), local
training runs, and the completion fires at

  now + comm * comm_scale + overhead + per_example * examples_processed.

A client is busy until its completion fires and is excluded from cohort
sampling in the meantime (allow_busy_reuse lifts this). The run terminates
once the number of aggregated client updates reaches the budget; the total
virtual time is the time of the last event that affected the output model.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import algorithms, latency, metrics, model, rng
from .algorithms import ClientUpdate, EmaAccumulator, ServerState, make_driver
from .config import ExperimentConfig
from .data import FederatedDataset, build_dataset
from .metrics import MetricsRecord
from .model import ModelLayout

EVENT_CLIENT_COMPLETED = "client_completed"
EVENT_DISPATCH = "dispatch"
EVENT_AUX_DEADLINE = "aux_deadline"
EVENT_EVAL_TICK = "eval_tick"


class EventQueue:
    """Min-heap of (fire_at, seq) with insertion-order tie-breaking."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, str, object]] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, fire_at: float, kind: str, payload: object, *, now: float) -> None:
        if fire_at < now:
            raise ValueError(f"cannot schedule {kind} at {fire_at} before now={now}")
        heapq.heappush(self._heap, (fire_at, self._seq, kind, payload))
        self._seq += 1

    def pop(self) -> tuple[float, str, object] | None:
        if not self._heap:
            return None
        fire_at, _, kind, payload = heapq.heappop(self._heap)
        return fire_at, kind, payload


@dataclass
class RunResult:
    """Everything one trial produces."""

    records: list[MetricsRecord]
    counters: dict[str, int]
    total_time_s: float
    server_steps: int
    aggregated_updates: int
    output_w: np.ndarray
    which_model: str

    @property
    def final_record(self) -> MetricsRecord:
        return self.records[-1]

    def summary_dict(self) -> dict:
        return {
            "total_time_s": self.total_time_s,
            "server_steps": self.server_steps,
            "aggregated_updates": self.aggregated_updates,
            "which_model": self.which_model,
            "final_total_acc": self.final_record.total_acc,
            "final_straggler_acc": self.final_record.straggler_acc,
            **{f"n_{k}": v for k, v in sorted(self.counters.items())},
        }


_COUNTER_KEYS = (
    "dispatches",
    "rounds_started",
    "aggregated_updates",
    "discarded_updates",
    "late_folded",
    "late_discarded",
    "dropped_after_deadline",
    "aux_rounds",
    "evals",
)


class Simulation:
    """One seeded run of one experiment config."""

    def __init__(
        self,
        config: ExperimentConfig,
        trial_seed: int,
        dataset: FederatedDataset | None = None,
        trace: bool = False,
    ) -> None:
        self.config = config
        self.algo = config.algo
        self.trial_seed = trial_seed
        self.trace = trace
        self.dataset = dataset if dataset is not None else build_dataset(
            config.dataset, config.effective_data_seed()
        )
        self.layout = ModelLayout(
            d_in=config.dataset.d_in,
            hidden=config.model.hidden,
            n_classes=config.dataset.n_classes,
            activation=config.model.activation,
        )
        self.scenario = config.latency

        w0 = model.init_params(
            self.layout, rng.stream(trial_seed, rng.INIT), scale=config.model.init_scale
        )
        ema = (
            EmaAccumulator(self.algo.ema_beta)
            if self.algo.resolved_ema_enabled()
            else None
        )
        self.state = ServerState(
            w=w0,
            eta_g=self.algo.eta_g,
            opt_kind=self.algo.resolved_server_opt(),
            adam_beta1=self.algo.adam_beta1,
            adam_beta2=self.algo.adam_beta2,
            adam_eps=self.algo.adam_eps,
            ema=ema,
        )

        self.now = 0.0
        self.queue = EventQueue()
        self.counters: dict[str, int] = {k: 0 for k in _COUNTER_KEYS}
        self.records: list[MetricsRecord] = []
        self.last_model_event = 0.0
        self._busy_until = np.zeros(config.dataset.m_clients)
        self._client_ids = [s.client_id for s in self.dataset.shards]
        self._cohort_gen = rng.stream(trial_seed, rng.COHORT)
        self._teacher_gen = rng.stream(trial_seed, rng.TEACHER)
        self._latency_gens: dict[int, np.random.Generator] = {}
        self._shuffle_gens: dict[int, np.random.Generator] = {}

        self.tau_limit: float | None = None
        if self.algo.time_limit:
            self.tau_limit = (
                self.algo.time_limit_s
                if self.algo.time_limit_s is not None
                else self._monte_carlo_time_limit()
            )

        self.driver = make_driver(self, self.algo)

    # -- context interface used by drivers -- #

    def sample_cohort(self, k: int) -> list[int]:
        """k sequential uniform picks without replacement from the id-sorted
        idle pool; one index draw per slot."""
        if self.algo.allow_busy_reuse:
            pool = list(self._client_ids)
        else:
            pool = [cid for cid in self._client_ids if self._busy_until[cid] <= self.now]
        if k > len(pool):
            raise RuntimeError(
                f"cohort of {k} requested at t={self.now:.3f} but only "
                f"{len(pool)} clients are idle"
            )
        picks = []
        for _ in range(k):
            j = int(self._cohort_gen.integers(len(pool)))
            picks.append(pool.pop(j))
        return picks

    def dispatch(
        self,
        client_id: int,
        round_id: int,
        w: np.ndarray,
        *,
        teacher_w: np.ndarray | None = None,
        anchor: np.ndarray | None = None,
        comm_scale: float = 1.0,
    ) -> ClientUpdate:
        """Run one client's local computation and schedule its completion."""
        if not self.algo.allow_busy_reuse and self._busy_until[client_id] > self.now:
            raise RuntimeError(f"client {client_id} dispatched while busy")
        shard = self.dataset.shard(client_id)
        profile = self.scenario.profile_for(shard.is_straggler)
        lat_gen = self._latency_gen(client_id)
        comm = latency.sample_lognormal(profile.comm, lat_gen)
        per_example = latency.sample_lognormal(profile.per_example, lat_gen)
        overhead = latency.sample_lognormal(profile.overhead, lat_gen)

        if self.tau_limit is not None:
            steps = max(
                1,
                math.floor((self.tau_limit - overhead) / (per_example * self.algo.batch_size)),
            )
            epochs = None
        else:
            steps = None
            epochs = self.algo.epochs

        w_final, steps_done, examples = model.local_sgd(
            w,
            self.layout,
            shard.features,
            shard.labels,
            eta_l=self.algo.eta_l,
            batch_size=self.algo.batch_size,
            epochs=epochs,
            steps=steps,
            gen=self._shuffle_gen(client_id),
            rho=self.algo.rho if teacher_w is not None else 0.0,
            nu=self.algo.nu if anchor is not None else 0.0,
            teacher_w=teacher_w,
            anchor=anchor,
            distill_loss=self.config.model.distill_loss,
            distill_temperature=self.config.model.distill_temperature,
        )
        total = comm * comm_scale + overhead + per_example * examples
        update = ClientUpdate(
            round_id=round_id,
            client_id=client_id,
            delta=w - w_final,
            dispatched_at=self.now,
            completed_at=self.now + total,
            examples_processed=examples,
            steps_done=steps_done,
            model_version=self.state.t,
        )
        self._busy_until[client_id] = update.completed_at
        self.queue.schedule(update.completed_at, EVENT_CLIENT_COMPLETED, update, now=self.now)
        self.counters["dispatches"] += 1
        return update

    def apply_server_update(self, summed_delta: np.ndarray, count: int) -> None:
        algorithms.server_apply(self.state, summed_delta, count)
        self.counters["aggregated_updates"] += count
        self.note_model_event()
        if self.state.t % self.config.eval_every == 0:
            self.queue.schedule(self.now, EVENT_EVAL_TICK, None, now=self.now)

    def schedule_aux_deadline(self, round_id: int, fire_at: float) -> None:
        self.queue.schedule(fire_at, EVENT_AUX_DEADLINE, round_id, now=self.now)

    def schedule_refill(self) -> None:
        self.queue.schedule(self.now, EVENT_DISPATCH, None, now=self.now)

    def budget_reached(self) -> bool:
        return self.counters["aggregated_updates"] >= self.config.budget

    def note_model_event(self) -> None:
        self.last_model_event = self.now

    def teacher_gen(self) -> np.random.Generator:
        return self._teacher_gen

    def teacher_comm_scale(self) -> float:
        return self.scenario.teacher_download_factor

    # -- internals -- #

    def _latency_gen(self, client_id: int) -> np.random.Generator:
        gen = self._latency_gens.get(client_id)
        if gen is None:
            gen = rng.stream(self.trial_seed, rng.LATENCY, client_id)
            self._latency_gens[client_id] = gen
        return gen

    def _shuffle_gen(self, client_id: int) -> np.random.Generator:
        gen = self._shuffle_gens.get(client_id)
        if gen is None:
            gen = rng.stream(self.trial_seed, rng.SHUFFLE, client_id)
            self._shuffle_gens[client_id] = gen
        return gen

    def _monte_carlo_time_limit(self, draws_per_client: int = 50) -> float:
        """Population percentile of one-epoch computation time (no comm).

        Pools overhead + per_example * shard_size draws over all clients
        using a dedicated stream keyed by the data seed, so every trial of
        an experiment shares the same limit.
        """
        gen = rng.stream(self.config.effective_data_seed(), rng.TIME_LIMIT)
        shards = self.dataset.shards
        mu_pe = np.empty(len(shards))
        sg_pe = np.empty(len(shards))
        mu_ov = np.empty(len(shards))
        sg_ov = np.empty(len(shards))
        sizes = np.empty(len(shards))
        for i, shard in enumerate(shards):
            profile = self.scenario.profile_for(shard.is_straggler)
            mu_pe[i], sg_pe[i] = profile.per_example.mu, profile.per_example.sigma
            mu_ov[i], sg_ov[i] = profile.overhead.mu, profile.overhead.sigma
            sizes[i] = shard.n_examples
        z_pe = gen.standard_normal((len(shards), draws_per_client))
        z_ov = gen.standard_normal((len(shards), draws_per_client))
        per_example = np.exp(mu_pe[:, None] + sg_pe[:, None] * z_pe)
        overhead = np.exp(mu_ov[:, None] + sg_ov[:, None] * z_ov)
        totals = overhead + per_example * sizes[:, None]
        return latency.nearest_rank_percentile(
            totals.ravel(), self.algo.time_limit_percentile
        )

    def _eval_record(self, at_time: float) -> None:
        vec = self.driver.eval_vector()
        total_acc, straggler_acc = metrics.evaluate_accuracy(
            vec, self.layout, self.dataset, self.config.eval_cap
        )
        record = MetricsRecord(
            virtual_time_s=at_time,
            server_step=self.state.t,
            aggregated_updates=self.counters["aggregated_updates"],
            total_acc=total_acc,
            straggler_acc=straggler_acc,
            which_model=self.driver.which_model(),
        )
        last = self.records[-1] if self.records else None
        if (
            last is not None
            and last.server_step == record.server_step
            and last.virtual_time_s == record.virtual_time_s
            and last.which_model == record.which_model
        ):
            return
        self.records.append(record)
        self.counters["evals"] += 1

    def run(self) -> RunResult:
        self.driver.start()
        while not self.driver.is_finished():
            item = self.queue.pop()
            if item is None:
                raise RuntimeError("event queue drained before the run terminated")
            fire_at, kind, payload = item
            assert fire_at >= self.now, "event queue produced a time regression"
            self.now = fire_at
            if kind == EVENT_CLIENT_COMPLETED:
                self.driver.on_client_completed(payload)
            elif kind == EVENT_DISPATCH:
                self.driver.on_dispatch()
            elif kind == EVENT_AUX_DEADLINE:
                self.driver.on_aux_deadline(payload)
            elif kind == EVENT_EVAL_TICK:
                self._eval_record(self.now)
            else:
                raise RuntimeError(f"unknown event kind {kind!r}")

        aggregated = self.counters["aggregated_updates"]
        if aggregated < self.config.budget:
            raise RuntimeError(
                f"run finished with {aggregated} aggregated updates, "
                f"below budget {self.config.budget}"
            )
        self._eval_record(self.last_model_event)
        return RunResult(
            records=self.records,
            counters=dict(self.counters),
            total_time_s=self.last_model_event,
            server_steps=self.state.t,
            aggregated_updates=aggregated,
            output_w=self.driver.eval_vector().copy(),
            which_model=self.driver.which_model(),
        )
