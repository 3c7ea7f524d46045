"""Federated optimization algorithms driven by the event engine.

A driver owns the round/cohort logic for one algorithm family and talks to
the simulation through a narrow context interface (dispatch clients, apply
server updates, schedule events). Conventions shared by every driver:

* A client update carries delta = w_dispatched - w_final, so the server
  subtracts: SGD does w <- w - (eta_g / count) * summed_delta.
* Delta sums are always accumulated in (model_version, client_id) order so
  aggregation is independent of event arrival order.
* Synchronous cohorts are sampled sequentially without replacement from the
  id-sorted idle pool, one uniform index draw per slot; the buffered driver
  draws from the same stream one client at a time, which makes the two
  families consume randomness identically.

Drivers:
  SyncRoundDriver    plain synchronous rounds (SGD or Adam server), with
                     optional over-selection and per-round time limits;
                     also the base for the history-distillation and
                     auxiliary-model variants below.
  HistoryDistillationDriver  over-selection rounds where late stragglers
                     fold into a bounded history of past round deltas, and
                     each dispatched client distills against a teacher
                     reconstructed from a uniformly sampled history entry;
                     the served model is an EMA of the fast-round iterates.
  AuxTrackDriver     over-selection rounds plus an auxiliary slow-timescale
                     model: stragglers fold into an augmented delta until a
                     per-round deadline, and the auxiliary model averages the
                     augmented updates in strict round order.
  BufferedDriver     fully asynchronous buffered aggregation with a fixed
                     concurrency target and optional distillation/proximal/
                     EMA/Adam modifications.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol

import numpy as np

if TYPE_CHECKING:
    pass


ALGORITHM_NAMES = ("fedavg", "fedadam", "fedbuff", "fare_dust", "feast")


@dataclass(frozen=True)
class AlgoConfig:
    """Algorithm selection plus every tunable shared across the drivers."""

    name: str
    eta_g: float = 1.0
    eta_l: float = 0.1
    batch_size: int = 20
    epochs: int = 1
    cohort_size: int = 50
    over_selection: bool = False
    over_selection_factor: float = 1.2
    dispatch_size: int | None = None
    time_limit: bool = False
    time_limit_s: float | None = None
    time_limit_percentile: float = 75.0
    buffer_size: int = 20
    max_concurrency: int = 100
    server_opt: str | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-4
    ema_enabled: bool | None = None
    ema_beta: float = 0.99
    history_k: int = 50
    rho: float = 0.0
    nu: float = 0.0
    feast_beta: float = 0.99
    kappa: float = 0.9
    eta_a: float | None = None
    tau_max: float = 100000.0
    strict_sequential: bool = False
    skip_distill_when_no_history: bool = False
    allow_busy_reuse: bool = False

    def __post_init__(self) -> None:
        if self.name not in ALGORITHM_NAMES:
            raise ValueError(f"unknown algorithm {self.name!r}; expected one of {ALGORITHM_NAMES}")
        if self.eta_g <= 0 or self.eta_l < 0:
            raise ValueError(f"need eta_g > 0 and eta_l >= 0, got {self.eta_g}, {self.eta_l}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.cohort_size < 1:
            raise ValueError(f"cohort_size must be >= 1, got {self.cohort_size}")
        if self.over_selection_factor < 1.0:
            raise ValueError("over_selection_factor must be >= 1")
        if self.dispatch_size is not None and self.dispatch_size < self.cohort_size:
            raise ValueError("dispatch_size must be >= cohort_size")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if self.max_concurrency < self.buffer_size and self.name == "fedbuff":
            raise ValueError("max_concurrency must be >= buffer_size")
        if self.server_opt not in (None, "sgd", "adam"):
            raise ValueError(f"server_opt must be sgd or adam, got {self.server_opt!r}")
        if not 0 <= self.ema_beta < 1:
            raise ValueError(f"ema_beta must be in [0, 1), got {self.ema_beta}")
        if not 0 <= self.feast_beta < 1:
            raise ValueError(f"feast_beta must be in [0, 1), got {self.feast_beta}")
        if self.history_k < 1:
            raise ValueError(f"history_k must be >= 1, got {self.history_k}")
        if self.rho < 0 or self.nu < 0:
            raise ValueError("rho and nu must be >= 0")
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if self.eta_a is not None and self.eta_a < 0:
            raise ValueError(f"eta_a must be >= 0, got {self.eta_a}")
        if self.tau_max < 0:
            raise ValueError(f"tau_max must be >= 0, got {self.tau_max}")
        if self.time_limit_s is not None and self.time_limit_s <= 0:
            raise ValueError("time_limit_s must be > 0")
        if not 0 < self.time_limit_percentile <= 100:
            raise ValueError("time_limit_percentile must be in (0, 100]")

    def resolved_dispatch_size(self) -> int:
        """Clients dispatched per synchronous round (B_t)."""
        if self.dispatch_size is not None:
            return self.dispatch_size
        if self.over_selection:
            return int(round(self.cohort_size * self.over_selection_factor))
        return self.cohort_size

    def resolved_server_opt(self) -> str:
        if self.server_opt is not None:
            return self.server_opt
        if self.name in ("fedadam", "fare_dust"):
            return "adam"
        return "sgd"

    def resolved_ema_enabled(self) -> bool:
        if self.name == "fare_dust":
            return True
        if self.ema_enabled is None:
            return False
        return self.ema_enabled

    def resolved_eta_a(self) -> float:
        if self.eta_a is not None:
            return self.eta_a
        return self.kappa * self.eta_g


@dataclass
class ClientUpdate:
    """Result of one client computation, delivered via a completion event."""

    round_id: int
    client_id: int
    delta: np.ndarray
    dispatched_at: float
    completed_at: float
    examples_processed: int
    steps_done: int
    model_version: int


# ---- Server-side optimizers ---- #


@dataclass
class EmaAccumulator:
    """Exponential moving average, initialized to the first vector seen."""

    beta: float
    value: np.ndarray | None = None

    def update(self, w: np.ndarray) -> None:
        if self.value is None:
            self.value = w.copy()
        else:
            self.value = self.beta * self.value + (1.0 - self.beta) * w


@dataclass
class ServerState:
    """Global model plus optimizer slots; t counts applied updates."""

    w: np.ndarray
    eta_g: float
    opt_kind: str = "sgd"
    t: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-4
    adam_m: np.ndarray | None = None
    adam_v: np.ndarray | None = None
    ema: EmaAccumulator | None = None

    def __post_init__(self) -> None:
        if self.opt_kind not in ("sgd", "adam"):
            raise ValueError(f"opt_kind must be sgd or adam, got {self.opt_kind!r}")
        if self.opt_kind == "adam" and self.adam_m is None:
            self.adam_m = np.zeros_like(self.w)
            self.adam_v = np.zeros_like(self.w)


def server_apply(state: ServerState, summed_delta: np.ndarray, count: int) -> ServerState:
    """Apply one aggregated update: the averaged delta acts as a pseudo-gradient.

    SGD:  w <- w - eta_g * (summed_delta / count)
    Adam: moment updates without bias correction, then
          w <- w - eta_g * m / (sqrt(v) + eps)
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if summed_delta.shape != state.w.shape:
        raise ValueError("summed_delta shape mismatch")
    g = summed_delta / count
    if state.opt_kind == "sgd":
        state.w = state.w - state.eta_g * g
    else:
        b1, b2 = state.adam_beta1, state.adam_beta2
        state.adam_m = b1 * state.adam_m + (1.0 - b1) * g
        state.adam_v = b2 * state.adam_v + (1.0 - b2) * (g * g)
        state.w = state.w - state.eta_g * state.adam_m / (np.sqrt(state.adam_v) + state.adam_eps)
    state.t += 1
    if state.ema is not None:
        state.ema.update(state.w)
    return state


def canonical_delta_sum(updates: list[ClientUpdate]) -> np.ndarray:
    """Sum deltas in (model_version, client_id) order, independent of arrival."""
    if not updates:
        raise ValueError("no updates to sum")
    ordered = sorted(updates, key=lambda u: (u.model_version, u.client_id))
    total = ordered[0].delta.copy()
    for u in ordered[1:]:
        total += u.delta
    return total


# ---- Bounded history of past round deltas ---- #


@dataclass
class DeltaHistoryEntry:
    origin_round: int
    summed_delta: np.ndarray
    contributor_count: int


class DeltaHistory:
    """Sliding window of the last k round deltas, with late-arrival folding."""

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValueError(f"history size must be >= 1, got {k}")
        self.k = k
        self._entries: dict[int, DeltaHistoryEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, origin_round: int, summed_delta: np.ndarray, count: int) -> None:
        if origin_round in self._entries:
            raise ValueError(f"round {origin_round} already in history")
        self._entries[origin_round] = DeltaHistoryEntry(origin_round, summed_delta, count)
        while len(self._entries) > self.k:
            oldest = min(self._entries)
            del self._entries[oldest]

    def fold(self, origin_round: int, delta: np.ndarray) -> bool:
        """Add a late straggler delta to its origin round; False if evicted."""
        entry = self._entries.get(origin_round)
        if entry is None:
            return False
        entry.summed_delta += delta
        entry.contributor_count += 1
        return True

    def sample(self, gen: np.random.Generator) -> DeltaHistoryEntry | None:
        """Uniform draw over stored entries (ordered by round); None if empty."""
        if not self._entries:
            return None
        keys = sorted(self._entries)
        return self._entries[keys[int(gen.integers(len(keys)))]]

    def rounds(self) -> list[int]:
        return sorted(self._entries)


def teacher_from_history(
    w: np.ndarray, entry: DeltaHistoryEntry, eta_g: float
) -> np.ndarray:
    """Reconstruct a teacher by replaying one averaged round delta from w."""
    return w - eta_g * (entry.summed_delta / entry.contributor_count)


# ---- Simulation context expected by drivers ---- #


class SimContext(Protocol):
    now: float
    counters: dict[str, int]
    state: ServerState
    trace: bool

    def sample_cohort(self, k: int) -> list[int]: ...

    def dispatch(
        self,
        client_id: int,
        round_id: int,
        w: np.ndarray,
        *,
        teacher_w: np.ndarray | None = None,
        anchor: np.ndarray | None = None,
        comm_scale: float = 1.0,
    ) -> ClientUpdate: ...

    def apply_server_update(self, summed_delta: np.ndarray, count: int) -> None: ...

    def schedule_aux_deadline(self, round_id: int, fire_at: float) -> None: ...

    def schedule_refill(self) -> None: ...

    def budget_reached(self) -> bool: ...

    def note_model_event(self) -> None: ...

    def teacher_gen(self) -> np.random.Generator: ...

    def teacher_comm_scale(self) -> float: ...


# ---- Synchronous rounds ---- #


@dataclass
class SyncRound:
    round_id: int
    started_at: float
    cohort: list[int]
    fast_ids: frozenset[int]
    expected_fast: int
    completed_at: dict[int, float] = field(default_factory=dict)
    fast_updates: list[ClientUpdate] = field(default_factory=list)
    pending_late: list[ClientUpdate] = field(default_factory=list)
    advanced: bool = False
    advanced_at: float = float("nan")
    n_arrived: int = 0


@dataclass
class RoundTraceEntry:
    """Per-round record kept only when tracing is enabled.

    completed_at covers every dispatched client, fast or not.
    """

    round_id: int
    started_at: float
    cohort: list[int]
    fast_ids: list[int]
    completed_at: dict[int, float]
    advanced_at: float
    w_after: np.ndarray


class SyncRoundDriver:
    """Synchronous rounds: dispatch B_t, aggregate the B fastest."""

    def __init__(self, sim: SimContext, config: AlgoConfig) -> None:
        self.sim = sim
        self.config = config
        self.cohort_size = config.cohort_size
        self.dispatch_size = config.resolved_dispatch_size()
        self.next_round_id = 0
        self.rounds: dict[int, SyncRound] = {}
        self.w_finished = False
        self.round_log: list[RoundTraceEntry] = []

    # -- hooks overridden by subclasses -- #

    def _teacher_for_dispatch(self) -> tuple[np.ndarray | None, float]:
        return None, 1.0

    def _after_advance(self, rnd: SyncRound, summed: np.ndarray) -> None:
        pass

    def _handle_late(self, update: ClientUpdate) -> None:
        self.sim.counters["discarded_updates"] += 1

    def _blocks_next_round(self) -> bool:
        return False

    # -- driver interface -- #

    def start(self) -> None:
        self._start_round()

    def is_finished(self) -> bool:
        return self.w_finished

    def eval_vector(self) -> np.ndarray:
        state = self.sim.state
        if state.ema is not None and state.ema.value is not None:
            return state.ema.value
        return state.w

    def which_model(self) -> str:
        state = self.sim.state
        if state.ema is not None and state.ema.value is not None:
            return "ema"
        return "global"

    def on_dispatch(self) -> None:
        raise AssertionError("synchronous drivers do not use refill events")

    def on_aux_deadline(self, round_id: int) -> None:
        raise AssertionError("no deadline events expected for this driver")

    def on_client_completed(self, update: ClientUpdate) -> None:
        rnd = self.rounds[update.round_id]
        rnd.n_arrived += 1
        if update.client_id in rnd.fast_ids:
            rnd.fast_updates.append(update)
            if len(rnd.fast_updates) == rnd.expected_fast:
                self._advance(rnd)
        elif rnd.advanced:
            self._handle_late(update)
        else:
            # Tied completion times can deliver a non-fast update before the
            # last fast one; hold it until the round advances.
            rnd.pending_late.append(update)
        if rnd.advanced and rnd.n_arrived == self.dispatch_size:
            del self.rounds[update.round_id]

    # -- internals -- #

    def _start_round(self) -> None:
        rid = self.next_round_id
        self.next_round_id += 1
        self.sim.counters["rounds_started"] += 1
        cohort = self.sim.sample_cohort(self.dispatch_size)
        anchor = self.sim.state.w.copy() if self.config.nu > 0 else None
        updates = []
        for cid in cohort:
            teacher_w, comm_scale = self._teacher_for_dispatch()
            updates.append(
                self.sim.dispatch(
                    cid,
                    rid,
                    self.sim.state.w,
                    teacher_w=teacher_w,
                    anchor=anchor,
                    comm_scale=comm_scale,
                )
            )
        by_finish = sorted(updates, key=lambda u: (u.completed_at, u.client_id))
        fast_ids = frozenset(u.client_id for u in by_finish[: self.cohort_size])
        self.rounds[rid] = SyncRound(
            round_id=rid,
            started_at=self.sim.now,
            cohort=cohort,
            fast_ids=fast_ids,
            expected_fast=self.cohort_size,
            completed_at={u.client_id: u.completed_at for u in updates},
        )

    def _advance(self, rnd: SyncRound) -> None:
        rnd.advanced = True
        rnd.advanced_at = self.sim.now
        summed = canonical_delta_sum(rnd.fast_updates)
        self._before_server_update(rnd)
        self.sim.apply_server_update(summed, self.cohort_size)
        if self.sim.trace:
            self.round_log.append(
                RoundTraceEntry(
                    round_id=rnd.round_id,
                    started_at=rnd.started_at,
                    cohort=list(rnd.cohort),
                    fast_ids=sorted(rnd.fast_ids),
                    completed_at=dict(rnd.completed_at),
                    advanced_at=rnd.advanced_at,
                    w_after=self.sim.state.w.copy(),
                )
            )
        rnd.fast_updates.clear()
        self._after_advance(rnd, summed)
        for update in rnd.pending_late:
            self._handle_late(update)
        rnd.pending_late.clear()
        if self.sim.budget_reached():
            self.w_finished = True
        elif not self._blocks_next_round():
            self._start_round()

    def _before_server_update(self, rnd: SyncRound) -> None:
        pass


class HistoryDistillationDriver(SyncRoundDriver):
    """Over-selection rounds with straggler folding into a teacher history."""

    def __init__(self, sim: SimContext, config: AlgoConfig) -> None:
        super().__init__(sim, config)
        self.history = DeltaHistory(config.history_k)

    def _teacher_for_dispatch(self) -> tuple[np.ndarray | None, float]:
        if self.config.rho <= 0:
            return None, 1.0
        entry = self.history.sample(self.sim.teacher_gen())
        if entry is None:
            if self.config.skip_distill_when_no_history:
                return None, 1.0
            # No history yet: the current global model stands in as teacher,
            # which the client already downloads.
            return self.sim.state.w.copy(), 1.0
        teacher = teacher_from_history(self.sim.state.w, entry, self.config.eta_g)
        return teacher, self.sim.teacher_comm_scale()

    def _after_advance(self, rnd: SyncRound, summed: np.ndarray) -> None:
        self.history.push(rnd.round_id, summed.copy(), self.cohort_size)

    def _handle_late(self, update: ClientUpdate) -> None:
        if self.history.fold(update.round_id, update.delta):
            self.sim.counters["late_folded"] += 1
        else:
            self.sim.counters["late_discarded"] += 1


@dataclass
class PendingAuxRound:
    """One round waiting for stragglers before its auxiliary-model update."""

    round_id: int
    w_snapshot: np.ndarray
    delta_plus: np.ndarray
    count_plus: int
    deadline: float
    n_dispatched: int
    n_reported: int
    ready: bool = False


class AuxTrackDriver(SyncRoundDriver):
    """Over-selection rounds plus an auxiliary model fed by augmented deltas.

    The global model advances on the B fastest updates as usual. Stragglers
    from round t keep folding into an augmented delta until min(round start +
    tau_max, all dispatched clients reported); the auxiliary model then takes

        w_plus = w_t - eta_g * (delta_plus / count_plus)
        a      = beta * (a - eta_a * (delta_plus / count_plus)) + (1 - beta) * w_plus

    strictly in round order. With strict_sequential the next round only
    starts after the previous round's auxiliary update, reproducing a
    blocking wait of tau_max per round.
    """

    def __init__(self, sim: SimContext, config: AlgoConfig) -> None:
        super().__init__(sim, config)
        self.aux: np.ndarray | None = None
        self.beta = config.feast_beta
        self.eta_a = config.resolved_eta_a()
        self.pending: dict[int, PendingAuxRound] = {}
        self.next_aux_round = 0
        self._snapshot: np.ndarray | None = None
        self.aux_log: list[np.ndarray] = []

    def start(self) -> None:
        self.aux = self.sim.state.w.copy()
        super().start()

    def is_finished(self) -> bool:
        return self.w_finished and not self.pending

    def eval_vector(self) -> np.ndarray:
        return self.aux if self.aux is not None else self.sim.state.w

    def which_model(self) -> str:
        return "aux"

    def _blocks_next_round(self) -> bool:
        return self.config.strict_sequential

    def _before_server_update(self, rnd: SyncRound) -> None:
        self._snapshot = self.sim.state.w.copy()

    def _after_advance(self, rnd: SyncRound, summed: np.ndarray) -> None:
        deadline = rnd.started_at + self.config.tau_max
        rec = PendingAuxRound(
            round_id=rnd.round_id,
            w_snapshot=self._snapshot,
            delta_plus=summed.copy(),
            count_plus=self.cohort_size,
            deadline=deadline,
            n_dispatched=self.dispatch_size,
            n_reported=self.cohort_size,
        )
        self._snapshot = None
        self.pending[rnd.round_id] = rec
        if not self.config.strict_sequential and rec.n_reported == rec.n_dispatched:
            rec.ready = True
            self._drain_ready()
        else:
            # A deadline in the past still fires "now"; queued same-time
            # completions hold earlier sequence numbers, so they fold first.
            self.sim.schedule_aux_deadline(rnd.round_id, max(deadline, self.sim.now))

    def _handle_late(self, update: ClientUpdate) -> None:
        rec = self.pending.get(update.round_id)
        if rec is None or rec.ready:
            self.sim.counters["dropped_after_deadline"] += 1
            return
        self._fold_straggler(rec, update)
        if not self.config.strict_sequential and rec.n_reported == rec.n_dispatched:
            rec.ready = True
            self._drain_ready()

    def _fold_straggler(self, rec: PendingAuxRound, update: ClientUpdate) -> None:
        rec.delta_plus += update.delta
        rec.count_plus += 1
        rec.n_reported += 1
        self.sim.counters["late_folded"] += 1

    def on_aux_deadline(self, round_id: int) -> None:
        rec = self.pending.get(round_id)
        if rec is None or rec.ready:
            return
        rec.ready = True
        self._drain_ready()

    def _drain_ready(self) -> None:
        # Later rounds can become ready before earlier ones; the auxiliary
        # update is applied strictly in round order, holding early-comers.
        while True:
            rec = self.pending.get(self.next_aux_round)
            if rec is None or not rec.ready:
                return
            self._apply_aux(rec)
            del self.pending[self.next_aux_round]
            self.next_aux_round += 1
            if self.config.strict_sequential and not self.w_finished:
                if self.sim.budget_reached():
                    self.w_finished = True
                else:
                    self._start_round()

    def _apply_aux(self, rec: PendingAuxRound) -> None:
        assert rec.round_id == self.next_aux_round, (
            f"auxiliary update for round {rec.round_id} out of order; "
            f"expected {self.next_aux_round}"
        )
        g = rec.delta_plus / rec.count_plus
        w_plus = rec.w_snapshot - self.sim.state.eta_g * g
        self.aux = self.beta * (self.aux - self.eta_a * g) + (1.0 - self.beta) * w_plus
        self.sim.counters["aux_rounds"] += 1
        self.sim.note_model_event()
        if self.sim.trace:
            self.aux_log.append(self.aux.copy())


# ---- Buffered asynchronous aggregation ---- #


@dataclass
class FlushTraceEntry:
    flushed_at: float
    members: list[tuple[int, int]]
    w_after: np.ndarray


class BufferedDriver:
    """Asynchronous buffered aggregation with a fixed concurrency target.

    max_concurrency clients run at all times; each completion lands its
    delta (unscaled) in the buffer, and every buffer_size-th landing flushes
    the canonical sum into the server optimizer. Refills are dispatched via
    queue events scheduled at the completion timestamp so that all tied
    completions are processed before any refill samples a client or reads
    the (possibly just-updated) global model.
    """

    def __init__(self, sim: SimContext, config: AlgoConfig) -> None:
        self.sim = sim
        self.config = config
        self.buffer: list[ClientUpdate] = []
        self.finished = False
        self.flush_log: list[FlushTraceEntry] = []

    def start(self) -> None:
        for _ in range(self.config.max_concurrency):
            self._dispatch_one()

    def is_finished(self) -> bool:
        return self.finished

    def eval_vector(self) -> np.ndarray:
        state = self.sim.state
        if state.ema is not None and state.ema.value is not None:
            return state.ema.value
        return state.w

    def which_model(self) -> str:
        state = self.sim.state
        if state.ema is not None and state.ema.value is not None:
            return "ema"
        return "global"

    def on_client_completed(self, update: ClientUpdate) -> None:
        self.buffer.append(update)
        if len(self.buffer) == self.config.buffer_size:
            summed = canonical_delta_sum(self.buffer)
            members = sorted((u.model_version, u.client_id) for u in self.buffer)
            self.sim.apply_server_update(summed, self.config.buffer_size)
            self.buffer.clear()
            if self.sim.trace:
                self.flush_log.append(
                    FlushTraceEntry(self.sim.now, members, self.sim.state.w.copy())
                )
            if self.sim.budget_reached():
                self.finished = True
        if not self.finished:
            self.sim.schedule_refill()

    def on_dispatch(self) -> None:
        if self.finished:
            return
        self._dispatch_one()

    def on_aux_deadline(self, round_id: int) -> None:
        raise AssertionError("no deadline events expected for this driver")

    def _dispatch_one(self) -> None:
        cid = self.sim.sample_cohort(1)[0]
        w = self.sim.state.w
        teacher_w = w.copy() if self.config.rho > 0 else None
        anchor = w.copy() if self.config.nu > 0 else None
        self.sim.dispatch(
            cid,
            self.sim.state.t,
            w,
            teacher_w=teacher_w,
            anchor=anchor,
            comm_scale=1.0,
        )


def make_driver(sim: SimContext, config: AlgoConfig):
    if config.name in ("fedavg", "fedadam"):
        return SyncRoundDriver(sim, config)
    if config.name == "fare_dust":
        return HistoryDistillationDriver(sim, config)
    if config.name == "feast":
        return AuxTrackDriver(sim, config)
    if config.name == "fedbuff":
        return BufferedDriver(sim, config)
    raise ValueError(f"unknown algorithm {config.name!r}")
