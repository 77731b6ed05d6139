"""The FEEL round state machine.

Each round: draw both channel realizations, select the K devices with the
largest downlink gain norms, water-fill the broadcast channel and send each
selected device a quantized difference between the current global model and
the server-side mirror of that device's estimate, run local SGD on the
refreshed estimates, water-fill the MAC, and aggregate the quantized local
updates (with per-device error feedback) into the global model.

The server's mirrors make the difference coding work: because the PS knows
every payload it ever delivered, mirror and device estimate stay bit-exactly
equal, and the downlink only ever carries what the device is missing.

Digital transmission at rates inside the capacity region is modeled as
error-free delivery of the payload object; the wire codec in `quantizer`
defines the actual bit layout and is exercised separately.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .capacity import bc_waterfill, mac_waterfill
from .channel import ChannelConfig, ChannelRealization, draw_downlink, draw_uplink
from .data import load_idx_dataset, shard_single_class, synth_classification
from .learner import (Learner, LocalSGDConfig, LogisticRegression, Mlp, evaluate,
                      local_update, make_optimizer)
from .quantizer import bit_count, dequantize, max_level_for_budget, quantize
from .rng import SeedTree

__all__ = [
    "ServerState",
    "DeviceState",
    "RoundReport",
    "select_devices",
    "Simulation",
    "build_simulation",
    "run_experiment",
    "MAX_SAFE_LEVEL",
]

logger = logging.getLogger(__name__)

# Levels beyond 2^53 - 1 cannot change a float64 reconstruction, so the
# protocol never requests them even when capacity would allow it.
MAX_SAFE_LEVEL = 2**53 - 1


@dataclass
class ServerState:
    theta: np.ndarray
    mirrors: list  # per-device copies of the device-side model estimates
    last_selected: np.ndarray  # iteration at which each device last got a payload
    round: int = 0


@dataclass
class DeviceState:
    estimate: np.ndarray
    error_accumulator: np.ndarray
    optimizer: object
    X: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class RoundReport:
    round: int
    selected: tuple
    starved: tuple  # selected devices whose downlink budget fit no payload
    transmitted: tuple  # devices whose uplink payload reached the server
    dl_q: dict  # device -> chosen downlink level (0 = starved)
    dl_capacity: dict  # device -> allocated downlink bits
    ul_q: dict
    ul_capacity: dict
    dl_bits_total: float
    ul_bits_total: float
    accuracy: float
    loss: float
    stalled: bool


def select_devices(realization: ChannelRealization, num_selected: int) -> np.ndarray:
    """Indices of the K devices with the largest downlink gain norms.

    Ties go to the lowest device index; the result is sorted ascending.
    """
    norms = np.sum(np.abs(realization.gains) ** 2, axis=1)
    if num_selected > norms.size:
        raise ValueError(f"cannot select {num_selected} of {norms.size} devices")
    if num_selected < 1:
        raise ValueError("must select at least one device")
    top = np.argsort(-norms, kind="stable")[:num_selected]
    return np.sort(top)


class Simulation:
    """Owns server/device state and advances one training round at a time."""

    def __init__(self, *, learner: Learner, shards, test_set, channel_config: ChannelConfig,
                 sgd_config: LocalSGDConfig, power_dl: float, power_ul: float,
                 num_selected: int, seeds: SeedTree, aggregation: str = "uniform",
                 baseline: bool = False, workers: int = 1, theta0=None,
                 max_level: int = MAX_SAFE_LEVEL, record_debug: bool = False):
        if power_dl <= 0 or power_ul <= 0:
            raise ValueError("powers must be positive")
        if aggregation not in ("uniform", "weighted"):
            raise ValueError(f"unknown aggregation {aggregation!r}")
        self.learner = learner
        self.channel_config = channel_config
        self.sgd_config = sgd_config
        self.power_dl = power_dl
        self.power_ul = power_ul
        self.num_selected = num_selected
        self.seeds = seeds
        self.aggregation = aggregation
        self.baseline = baseline
        self.workers = workers
        self.max_level = max_level
        self.record_debug = record_debug
        self.test_set = test_set
        self.last_debug = None

        if theta0 is None:
            theta0 = learner.init_params(seeds.stream("init"))
        theta0 = np.asarray(theta0, dtype=np.float64)
        self.dim = theta0.size
        num_devices = channel_config.num_devices
        if len(shards) != num_devices:
            raise ValueError("one shard per device required")
        self.devices = [
            DeviceState(estimate=theta0.copy(),
                        error_accumulator=np.zeros(self.dim),
                        optimizer=make_optimizer(sgd_config.optimizer_kind),
                        X=X, y=y)
            for X, y in shards
        ]
        for dev in self.devices:
            if dev.y.size == 0:
                raise ValueError("device has no data")
        self.server = ServerState(
            theta=theta0.copy(),
            mirrors=[theta0.copy() for _ in range(num_devices)],
            last_selected=np.zeros(num_devices, dtype=np.int64),
        )
        self.shard_sizes = np.array([dev.y.size for dev in self.devices])
        # global loss with B_m/B weights equals the plain mean over the union
        self.pool_X = np.concatenate([dev.X for dev in self.devices])
        self.pool_y = np.concatenate([dev.y for dev in self.devices])

    def _map(self, fn, items):
        if self.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def _pick_level(self, capacity_bits: float) -> int:
        budget = math.floor(capacity_bits)
        return min(max_level_for_budget(self.dim, budget), self.max_level)

    def _downlink(self, dl: ChannelRealization, selected: np.ndarray, t: int):
        alloc = bc_waterfill(dl.gains[selected], self.power_dl)
        capacities = dict(zip(selected.tolist(), alloc.per_device_capacity))
        if self.baseline:
            q_common = self._pick_level(min(alloc.per_device_capacity))
            levels = {int(k): q_common for k in selected}
        else:
            levels = {int(k): self._pick_level(capacities[int(k)]) for k in selected}

        participants = [k for k in selected.tolist() if levels[k] >= 1]
        starved = [k for k in selected.tolist() if levels[k] == 0]
        recons = {}
        if self.baseline and participants:
            # one shared payload: every device holds the same estimate
            diff = self.server.theta - self.server.mirrors[participants[0]]
            payload = quantize(diff, levels[participants[0]],
                               self.seeds.stream("quantizer-dl", t, "broadcast"))
            shared = dequantize(payload)
            recons = {k: shared for k in participants}
        elif participants:
            def encode(k):
                diff = self.server.theta - self.server.mirrors[k]
                payload = quantize(diff, levels[k],
                                   self.seeds.stream("quantizer-dl", t, k))
                return k, dequantize(payload)

            recons = dict(self._map(encode, participants))
        for k in participants:
            self.devices[k].estimate = self.devices[k].estimate + recons[k]
            self.server.mirrors[k] = self.server.mirrors[k] + recons[k]
            self.server.last_selected[k] = t
        if self.baseline and participants:
            bits = bit_count(self.dim, levels[participants[0]])  # one shared message
        else:
            bits = sum(bit_count(self.dim, levels[k]) for k in participants)
        return participants, starved, levels, capacities, bits, recons

    def _uplink(self, ul: ChannelRealization, participants, t: int):
        if not participants:
            return {}, {}, 0.0, [], {}, {}
        alloc = mac_waterfill(ul.gains[np.array(participants)], self.power_ul)
        budget = alloc.per_device_capacity[0]
        capacities = {k: float(budget) for k in participants}
        q_ul = self._pick_level(budget)
        levels = {k: q_ul for k in participants}

        def train_and_encode(k):
            dev = self.devices[k]
            delta = local_update(self.learner, dev.estimate, dev.X, dev.y,
                                 self.sgd_config, self.seeds.stream("batch", t, k),
                                 dev.optimizer, round_index=t)
            carry = delta + dev.error_accumulator
            if levels[k] >= 1:
                payload = quantize(carry, levels[k],
                                   self.seeds.stream("quantizer-ul", t, k))
                recon = dequantize(payload)
                return k, delta, recon, carry - recon
            return k, delta, None, carry

        results = self._map(train_and_encode, participants)
        transmitted = []
        recons = {}
        deltas = {}
        for k, delta, recon, residual in results:
            self.devices[k].error_accumulator = residual
            deltas[k] = delta
            if recon is not None:
                transmitted.append(k)
                recons[k] = recon
        bits = sum(bit_count(self.dim, levels[k]) for k in transmitted)
        return levels, capacities, bits, transmitted, recons, deltas

    def _aggregate(self, transmitted, recons):
        if not transmitted:
            return
        if self.aggregation == "weighted":
            weights = self.shard_sizes[transmitted].astype(float)
            weights /= weights.sum()
        else:
            weights = np.full(len(transmitted), 1.0 / len(transmitted))
        update = np.zeros(self.dim)
        for w, k in zip(weights, transmitted):  # ascending index, fixed order
            update += w * recons[k]
        self.server.theta = self.server.theta + update

    def run_round(self) -> RoundReport:
        t = self.server.round
        dl = draw_downlink(self.channel_config, self.seeds, t)
        if self.baseline:
            selected = np.arange(self.channel_config.num_devices)
        else:
            selected = select_devices(dl, self.num_selected)
        participants, starved, dl_q, dl_cap, dl_bits, dl_recons = \
            self._downlink(dl, selected, t)

        ul = draw_uplink(self.channel_config, self.seeds, t)
        ul_q, ul_cap, ul_bits, transmitted, ul_recons, deltas = \
            self._uplink(ul, participants, t)
        self._aggregate(transmitted, ul_recons)

        stalled = not transmitted
        if stalled:
            logger.warning("round %d stalled: no device transmitted", t)
        if self.test_set is not None:
            accuracy = evaluate(self.learner, self.server.theta, *self.test_set)
        else:
            accuracy = float("nan")
        loss = self.learner.loss(self.server.theta, self.pool_X, self.pool_y)
        if self.record_debug:
            self.last_debug = {
                "dl_recon": dl_recons,
                "delta": deltas,
                "ul_recon": ul_recons,
            }
        self.server.round = t + 1
        return RoundReport(
            round=t,
            selected=tuple(int(k) for k in selected),
            starved=tuple(starved),
            transmitted=tuple(transmitted),
            dl_q=dl_q,
            dl_capacity={k: float(v) for k, v in dl_cap.items()},
            ul_q=ul_q,
            ul_capacity=ul_cap,
            dl_bits_total=float(dl_bits),
            ul_bits_total=float(ul_bits),
            accuracy=accuracy,
            loss=loss,
            stalled=stalled,
        )

    def run(self, rounds: int):
        return [self.run_round() for _ in range(rounds)]


def _balanced_truncate(dataset, per_class_limit):
    keep = []
    for c in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == c)[:per_class_limit]
        keep.append(idx)
    keep = np.concatenate(keep)
    return type(dataset)(features=dataset.features[keep],
                         labels=dataset.labels[keep],
                         num_classes=dataset.num_classes)


def build_simulation(config, *, record_debug: bool = False) -> Simulation:
    """Assemble data, learner, and channel state from an ExperimentConfig."""
    seeds = SeedTree(config.seed)
    ds = config.dataset
    if ds.kind == "synthetic":
        train = synth_classification(ds.classes, ds.per_class, ds.dim,
                                     ds.separation, seeds.stream("data-train"))
        test = synth_classification(ds.classes, ds.test_per_class, ds.dim,
                                    ds.separation, seeds.stream("data-test"))
    else:
        train = load_idx_dataset(ds.train_images, ds.train_labels, ds.num_classes)
        test = load_idx_dataset(ds.test_images, ds.test_labels, ds.num_classes)
        if ds.per_class_limit is not None:
            train = _balanced_truncate(train, ds.per_class_limit)

    plan = shard_single_class(train, config.devices, seeds.stream("data-shuffle"))
    if plan.dropped:
        logger.info("sharding dropped %d remainder examples", plan.dropped)
    shards = [(train.features[idx], train.labels[idx]) for idx in plan.assignment]

    num_features = train.features.shape[1]
    if config.learner == "logistic":
        learner = LogisticRegression(num_features, train.num_classes)
    else:
        learner = Mlp(num_features, config.hidden_units, train.num_classes)

    sgd_config = LocalSGDConfig(tau=config.local_steps,
                                batch_size=config.batch_size,
                                learning_rate=config.learning_rate,
                                optimizer_kind=config.optimizer)
    channel_config = ChannelConfig(num_devices=config.devices,
                                   s_dl=config.s_dl, s_ul=config.s_ul,
                                   sigma2_dl=config.sigma2_dl,
                                   sigma2_ul=config.sigma2_ul)
    return Simulation(
        learner=learner,
        shards=shards,
        test_set=(test.features, test.labels),
        channel_config=channel_config,
        sgd_config=sgd_config,
        power_dl=config.power_dl,
        power_ul=config.power_ul,
        num_selected=config.selected,
        seeds=seeds,
        aggregation=config.aggregation,
        baseline=config.baseline,
        workers=config.workers,
        record_debug=record_debug,
    )


def run_experiment(config) -> list:
    """Execute a full experiment described by an ExperimentConfig."""
    return build_simulation(config).run(config.rounds)
