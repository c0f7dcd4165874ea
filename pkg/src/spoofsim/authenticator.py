"""The defender receiver's signal-authentication classifier.

R trains a dense network on labelled spectrum-sensing bursts: positives
are legitimate QPSK transmissions from T, negatives are structureless
random-phase bursts sent at the same power from the adversary position.
Bursts pass through the receiver front end (see `frontend`) before the
network; quality is reported as misdetection (legitimate classified as
foreign) and false alarm (foreign classified as legitimate) rates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .frontend import condition_rows
from .nn import (AdamState, DenseNetwork, TrainConfig, adam_step, backward,
                 cross_entropy_grad, forward, init_network, predict)
from .scenario import ScenarioConfig
from .waveform import (SYMBOLS_PER_BURST, features, random_symbol_phases,
                       sample_intended_burst, sample_waveform_burst)

NOT_T = 0
FROM_T = 1

CLASSIFIER_HIDDEN = (50, 50, 50)
N_CLASSES = 2


@dataclass
class LabeledDataset:
    """Raw feature matrix plus integer labels (FROM_T / NOT_T).

    n_antennas and samples_per_symbol describe the burst geometry behind
    the feature layout; they are filled by build_dataset and needed to
    train a classifier (the CSV form stores only labels and features, so
    a loader's caller must restate them).
    """

    features: np.ndarray
    labels: np.ndarray
    n_antennas: int | None = None
    samples_per_symbol: int | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be 2-D and labels 1-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature row count does not match label count")
        if not np.all((self.labels == FROM_T) | (self.labels == NOT_T)):
            raise ValueError("labels must be FROM_T or NOT_T")

    def __len__(self) -> int:
        return self.labels.shape[0]


@dataclass
class ClassifierMetrics:
    """Exact error counts and rates of one evaluation run."""

    n: int
    n_from_t: int
    n_md: int
    n_fa: int
    e_md: float
    e_fa: float

    def __post_init__(self):
        if not (0 < self.n_from_t < self.n):
            raise ValueError("evaluation needs both classes present")
        if not (0 <= self.n_md <= self.n_from_t and 0 <= self.n_fa <= self.n - self.n_from_t):
            raise ValueError("error counts exceed class sizes")
        if self.e_md != self.n_md / self.n_from_t or \
           self.e_fa != self.n_fa / (self.n - self.n_from_t):
            raise ValueError("rates must equal their defining count ratios exactly")

    @classmethod
    def from_counts(cls, n, n_from_t, n_md, n_fa) -> "ClassifierMetrics":
        if not (0 < n_from_t < n):
            raise ValueError("evaluation needs both classes present")
        return cls(n, n_from_t, n_md, n_fa, n_md / n_from_t, n_fa / (n - n_from_t))

    @property
    def worst_error(self) -> float:
        return max(self.e_md, self.e_fa)


def build_dataset(scenario: ScenarioConfig, n_samples, positive_fraction=0.5,
                  rng=None) -> LabeledDataset:
    """Generate labelled sensing bursts at R with fresh fading per burst.

    Each sample is positive with probability `positive_fraction`
    (independently, then adjusted so both classes occur at least once).
    Positives carry fresh random payload bits from T; negatives carry
    i.i.d. uniform symbol phases transmitted at full power from the
    adversary training position.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples, one per class")
    if not (0.0 < positive_fraction < 1.0):
        raise ValueError("positive_fraction must lie strictly inside (0, 1)")
    if rng is None:
        rng = np.random.default_rng()
    sc = scenario
    t_phases = sc.t_device_phases()
    at_phases = sc.at_device_phases()
    labels = (rng.random(n_samples) < positive_fraction).astype(np.int64)
    if labels.sum() == 0:
        labels[0] = FROM_T
    elif labels.sum() == n_samples:
        labels[0] = NOT_T
    x = np.empty((n_samples, sc.feature_length))
    for i, label in enumerate(labels):
        if label == FROM_T:
            bits = rng.integers(0, 2, size=8)
            ch = sc.draw_link("t", "r", rng)
            burst = sample_intended_burst(bits, t_phases, ch, sc.power,
                                          sc.samples_per_symbol, noise=True, rng=rng,
                                          carrier_jitter=sc.carrier_jitter)
        else:
            phases = random_symbol_phases(SYMBOLS_PER_BURST, rng)
            ch = sc.draw_link("at", "r", rng)
            burst = sample_waveform_burst(phases, at_phases, ch, sc.power,
                                          sc.samples_per_symbol, noise=True, rng=rng,
                                          carrier_jitter=sc.carrier_jitter)
        x[i] = features(burst)
    return LabeledDataset(x, labels, sc.n_r, sc.samples_per_symbol)


def one_hot(labels) -> np.ndarray:
    rows = np.zeros((len(labels), N_CLASSES))
    rows[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return rows


@dataclass
class Authenticator:
    """A trained authentication network plus the front-end geometry it expects."""

    net: DenseNetwork
    n_antennas: int
    samples_per_symbol: int

    def condition(self, rows) -> np.ndarray:
        return condition_rows(rows, self.n_antennas, self.samples_per_symbol)


def network_of(classifier) -> DenseNetwork:
    """Underlying dense network of a classifier (wrapped or bare)."""
    return classifier.net if isinstance(classifier, Authenticator) else classifier


def train_classifier(train_set: LabeledDataset, config: TrainConfig | None = None,
                     n_antennas=None, samples_per_symbol=None) -> Authenticator:
    """Train the authentication network: front-end conditioning, then a net
    of shape [features, 50, 50, 50, 2] with relu hidden layers, softmax
    output, cross-entropy and Adam."""
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    n_ant = n_antennas if n_antennas is not None else train_set.n_antennas
    sps = samples_per_symbol if samples_per_symbol is not None else train_set.samples_per_symbol
    if n_ant is None or sps is None:
        raise ValueError("burst geometry (n_antennas, samples_per_symbol) is required")
    cfg = config if config is not None else TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    net = init_network([train_set.features.shape[1], *CLASSIFIER_HIDDEN, N_CLASSES], rng=rng)
    state = AdamState.for_network(net)
    x = condition_rows(train_set.features, n_ant, sps)
    targets = one_hot(train_set.labels)
    n = len(train_set)
    steps = 0
    while steps < cfg.train_steps:
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            out, cache = forward(net, x[idx])
            grads = backward(net, cache, cross_entropy_grad(out, targets[idx]))
            adam_step(net, grads, state, cfg)
            steps += 1
            if steps >= cfg.train_steps:
                break
    return Authenticator(net, n_ant, sps)


def classify(classifier, feature_rows) -> np.ndarray:
    """Hard label decisions (argmax of the softmax output) for raw feature rows."""
    if isinstance(classifier, Authenticator):
        out = predict(classifier.net, classifier.condition(feature_rows))
    else:
        out = predict(classifier, feature_rows)
    return np.argmax(np.atleast_2d(out), axis=1)


def evaluate(classifier, test_set: LabeledDataset) -> ClassifierMetrics:
    """Count misdetections and false alarms on a two-class test set."""
    if len(test_set) == 0:
        raise ValueError("test set is empty")
    labels = test_set.labels
    n_from_t = int((labels == FROM_T).sum())
    if n_from_t == 0 or n_from_t == len(test_set):
        raise ValueError("metrics are undefined on a single-class test set")
    preds = classify(classifier, test_set.features)
    n_md = int(((labels == FROM_T) & (preds != FROM_T)).sum())
    n_fa = int(((labels == NOT_T) & (preds == FROM_T)).sum())
    return ClassifierMetrics.from_counts(len(test_set), n_from_t, n_md, n_fa)


def tune_hyperparameters(scenario: ScenarioConfig, grid, rng,
                         n_train=1000, n_val=1000, positive_fraction=0.5) -> TrainConfig:
    """Pick the training config minimising max(e_MD, e_FA) on a validation split.

    Ties break toward the smaller batch size, then the earlier grid entry.
    The candidate configs all see the same train/validation data.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    train_set = build_dataset(scenario, n_train, positive_fraction, rng)
    val_set = build_dataset(scenario, n_val, positive_fraction, rng)
    scores = []
    for cfg in grid:
        net = train_classifier(train_set, cfg)
        scores.append(evaluate(net, val_set).worst_error)
    best = min(range(len(grid)), key=lambda i: (scores[i], grid[i].batch_size, i))
    return grid[best]


_LABEL_NAMES = {FROM_T: "FROM_T", NOT_T: "NOT_T"}
_NAME_LABELS = {v: k for k, v in _LABEL_NAMES.items()}


def save_dataset_csv(dataset: LabeledDataset, path) -> None:
    """One row per sample: label name, then the feature values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for label, row in zip(dataset.labels, dataset.features):
            writer.writerow([_LABEL_NAMES[int(label)]] + [repr(float(v)) for v in row])


def load_dataset_csv(path) -> LabeledDataset:
    labels, rows = [], []
    with open(Path(path), newline="") as fh:
        for record in csv.reader(fh):
            if not record:
                continue
            labels.append(_NAME_LABELS[record[0]])
            rows.append([float(v) for v in record[1:]])
    return LabeledDataset(np.asarray(rows), np.asarray(labels))
