"""Learned per-UE rate approximators and their model-based initializers.

Each UE gets a small feedforward network mapping the flattened bits of
(A, C) to a nonnegative rate estimate. Before any measurement arrives
the networks are pre-trained against a closed-form SINR surrogate whose
fidelity depends on how much topological knowledge is available; after
that, measured rates are appended to a dataset and the networks are
refined incrementally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mmwshare.interference import RATE_FLOOR_BPS

HIDDEN_LAYERS = [20, 20, 20, 20, 20]
ADAM_LR = 1e-3
ADAM_BETAS = (0.9, 0.999)
BATCH_SIZE = 10
STALL_EPOCHS = 20
STALL_TOL = 1e-6
STALL_NOISE_SCALE = 1e-4


def sinc(x):
    """Unnormalized sinc: sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x) / np.pi)


def prop1_interference(b, i, u, C, topology, config):
    """Closed-form mean interference from BS i at UE u served by BS b.

    Valid for single-path line-of-sight links: the level is set by the
    path loss and a sinc of the arrival-angle separation at the UE, and
    vanishes entirely once BS i coordinates (nulls) UE u's channel.
    """
    if C[i, u]:
        return 0.0
    l_iu = topology.pathloss_matrix[i, u]
    delta = topology.ue_angles[b, u] - topology.ue_angles[i, u]
    return (
        config.n_bs_antennas
        * config.n_ue_antennas
        * l_iu
        * config.tx_power_w
        * float(np.abs(sinc(config.n_ue_antennas * delta / 2.0)))
    )


def surrogate_rates(A, C, topology, config, knowledge="full"):
    """Model-based rate estimates for a decision (A, C), in bit/s.

    knowledge levels: "full" uses path losses and arrival angles (sinc
    attenuation), "partial" only path losses (worst-case |sinc| = 1),
    "none" assumes an interference-free network with unit link gain.
    """
    if knowledge not in ("full", "partial", "none"):
        raise ValueError(f"unknown knowledge level {knowledge!r}")
    A = np.asarray(A)
    C = np.asarray(C)
    num_ue = topology.num_ue
    rates = np.zeros(num_ue)
    array_gain = config.n_bs_antennas * config.n_ue_antennas
    active = A.sum(axis=1) > 0  # silent BSs radiate nothing
    for u in range(num_ue):
        servers = np.flatnonzero(A[:, u])
        if len(servers) != 1:
            raise ValueError(f"UE {u} needs exactly one serving BS")
        b = int(servers[0])
        if knowledge == "none":
            rx = array_gain * config.tx_power_w
            interference = 0.0
        else:
            rx = array_gain * topology.pathloss_matrix[b, u] * config.tx_power_w
            interference = 0.0
            for i in range(topology.num_bs):
                if i == b or not active[i]:
                    continue
                if knowledge == "full":
                    interference += prop1_interference(b, i, u, C, topology, config)
                elif not C[i, u]:
                    interference += (
                        array_gain * topology.pathloss_matrix[i, u] * config.tx_power_w
                    )
        w_z = topology.ue_bandwidth(u)
        sinr = rx / (interference + w_z * config.noise_psd_w_hz)
        rates[u] = w_z * np.log2(1.0 + sinr)
    return rates


class SurrogateRateEvaluator:
    """Closed-form evaluator usable directly by the optimizer."""

    def __init__(self, topology, config, knowledge="full"):
        if knowledge == "full" and topology.ue_angles is None:
            raise ValueError("full topological knowledge requires angle tables")
        self.topology = topology
        self.config = config
        self.knowledge = knowledge
        self._cache = {}

    def rates(self, A, C):
        key = (np.asarray(A).tobytes(), np.asarray(C).tobytes())
        hit = self._cache.get(key)
        if hit is None:
            hit = surrogate_rates(A, C, self.topology, self.config, self.knowledge)
            self._cache[key] = hit
        return hit


class Mlp:
    """Plain-numpy feedforward regressor with rectifier hidden layers.

    Trains with mini-batch squared-error gradients under a per-parameter
    adaptive step size (exponential moving averages of the gradient and
    its square). When training stalls the parameters get a small
    Gaussian kick to escape flat regions.
    """

    def __init__(self, input_dim, rng, hidden=None):
        sizes = [input_dim] + list(hidden or HIDDEN_LAYERS) + [1]
        self.sizes = sizes
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, (fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._m = [np.zeros_like(w) for w in self.weights + self.biases]
        self._v = [np.zeros_like(w) for w in self.weights + self.biases]
        self._t = 0
        self._stall_count = 0
        self._best_loss = np.inf

    def forward(self, x):
        """Raw (pre-nonnegativity) output for a batch of inputs."""
        h = np.atleast_2d(x)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1])[:, 0]

    def predict(self, x):
        """Nonnegative output via softplus of the raw head."""
        raw = self.forward(x)
        return np.logaddexp(0.0, raw)  # softplus, numerically stable

    def _grads(self, x, y):
        h = np.atleast_2d(x)
        activations = [h]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            activations.append(h)
        raw = (h @ self.weights[-1] + self.biases[-1])[:, 0]
        pred = np.logaddexp(0.0, raw)
        err = pred - y
        loss = float(np.mean(err**2))
        # d softplus / d raw = sigmoid(raw)
        sig = 1.0 / (1.0 + np.exp(-raw))
        delta = (2.0 * err * sig / len(y))[:, None]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for layer in reversed(range(len(self.weights))):
            grads_w[layer] = activations[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (activations[layer] > 0)
        return loss, grads_w, grads_b

    def step(self, x, y):
        """One adaptive gradient step on a mini-batch; returns the loss."""
        loss, grads_w, grads_b = self._grads(x, y)
        params = self.weights + self.biases
        grads = grads_w + grads_b
        b1, b2 = ADAM_BETAS
        self._t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            self._m[k] = b1 * self._m[k] + (1 - b1) * g
            self._v[k] = b2 * self._v[k] + (1 - b2) * g**2
            m_hat = self._m[k] / (1 - b1**self._t)
            v_hat = self._v[k] / (1 - b2**self._t)
            p -= ADAM_LR * m_hat / (np.sqrt(v_hat) + 1e-8)
        return loss

    def train_epochs(self, x, y, epochs, rng, batch_size=BATCH_SIZE):
        """Shuffled mini-batch epochs with stall detection/perturbation."""
        n = len(y)
        losses = []
        for _ in range(epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                epoch_loss += self.step(x[idx], y[idx]) * len(idx)
            epoch_loss /= n
            losses.append(epoch_loss)
            if epoch_loss < self._best_loss - STALL_TOL:
                self._best_loss = epoch_loss
                self._stall_count = 0
            else:
                self._stall_count += 1
                if self._stall_count >= STALL_EPOCHS:
                    self._perturb(rng)
                    self._stall_count = 0
        return losses

    def _perturb(self, rng):
        for p in self.weights + self.biases:
            rms = np.sqrt(np.mean(p**2)) or 1.0
            p += rng.normal(0.0, STALL_NOISE_SCALE * rms, p.shape)

    def flat_params(self):
        return np.concatenate([p.ravel() for p in self.weights + self.biases])

    def load_flat_params(self, flat):
        offset = 0
        for p in self.weights + self.biases:
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def save(self, path):
        np.savetxt(path, self.flat_params(),
                   header="layer sizes: " + " ".join(map(str, self.sizes)))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            header = fh.readline()
        sizes = [int(s) for s in header.split(":")[1].split()]
        model = cls(sizes[0], np.random.default_rng(0), hidden=sizes[1:-1])
        model.load_flat_params(np.loadtxt(path))
        return model


@dataclass
class DatasetRecord:
    ci_index: int
    A: np.ndarray
    C: np.ndarray
    rates: np.ndarray  # bit/s, length U


@dataclass
class Dataset:
    """Ordered measurement log feeding the approximators."""

    records: list = field(default_factory=list)

    def append(self, ci_index, A, C, rates):
        self.records.append(
            DatasetRecord(int(ci_index), np.asarray(A).astype(int).copy(),
                          np.asarray(C).astype(int).copy(),
                          np.asarray(rates, dtype=float).copy())
        )

    def __len__(self):
        return len(self.records)

    def save(self, path):
        with open(path, "w") as fh:
            for rec in self.records:
                a_bits = "".join(map(str, rec.A.ravel()))
                c_bits = "".join(map(str, rec.C.ravel()))
                rates = ",".join(repr(float(r)) for r in rec.rates)
                fh.write(f"{rec.ci_index} {a_bits} {c_bits} {rates}\n")

    @classmethod
    def load(cls, path, num_bs):
        ds = cls()
        with open(path) as fh:
            for line in fh:
                ci, a_bits, c_bits, rates = line.split()
                num_ue = len(a_bits) // num_bs
                A = np.array(list(a_bits), dtype=int).reshape(num_bs, num_ue)
                C = np.array(list(c_bits), dtype=int).reshape(num_bs, num_ue)
                ds.append(int(ci), A, C, np.array([float(r) for r in rates.split(",")]))
        return ds


def decision_features(A, C):
    """Network input: flattened A bits followed by flattened C bits."""
    return np.concatenate([np.asarray(A).ravel(), np.asarray(C).ravel()]).astype(float)


class RateModelSet:
    """Per-UE rate approximators plus the shared measurement dataset.

    Rates are learned in units of the UE's spectral efficiency
    (rate / bandwidth) so targets stay O(1) for the squared-error loss.
    """

    def __init__(self, topology, config, knowledge="full", rng=None,
                 sample_fn=None, pretrain=True):
        self.topology = topology
        self.config = config
        self.knowledge = knowledge
        self.rng = rng or np.random.default_rng(config.seed)
        self.dataset = Dataset()
        self._build_models()
        if pretrain:
            self.pretrain(sample_fn)

    def _build_models(self):
        dim = 2 * self.topology.num_bs * self.topology.num_ue
        self.models = [Mlp(dim, self.rng) for _ in range(self.topology.num_ue)]
        self._cache = {}

    def pretrain(self, sample_fn=None, num_samples=None, epochs=None):
        """Supervised fit against the closed-form surrogate labels."""
        from mmwshare.optimizer import FeasibilitySampler

        num_samples = num_samples or self.config.pretrain_samples
        epochs = epochs or self.config.pretrain_epochs
        if sample_fn is None:
            sampler = FeasibilitySampler(self.topology, self.config)
            sample_fn = lambda rng: sampler.sample(rng)
        feats = []
        labels = []
        for _ in range(num_samples):
            A, C = sample_fn(self.rng)
            feats.append(decision_features(A, C))
            labels.append(
                surrogate_rates(A, C, self.topology, self.config, self.knowledge)
            )
        x = np.array(feats)
        y = np.array(labels)  # (samples, U) in bit/s
        for u, model in enumerate(self.models):
            w_z = self.topology.ue_bandwidth(u)
            model.train_epochs(x, y[:, u] / w_z, epochs, self.rng)
        self._cache = {}

    def predict(self, A, C):
        """Estimated rates in bit/s for every UE."""
        key = (np.asarray(A).tobytes(), np.asarray(C).tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        x = decision_features(A, C)[None, :]
        out = np.array(
            [
                self.topology.ue_bandwidth(u) * model.predict(x)[0]
                for u, model in enumerate(self.models)
            ]
        )
        self._cache[key] = out
        return out

    def predict_batch(self, pairs):
        """Estimated rates for many (A, C) pairs; one forward per model."""
        x = np.array([decision_features(a, c) for a, c in pairs])
        per_model = np.array([m.predict(x) for m in self.models])  # (U, n)
        bw = np.array(
            [self.topology.ue_bandwidth(u) for u in range(self.topology.num_ue)]
        )
        return (per_model * bw[:, None]).T  # (n, U)

    # evaluator protocol for the optimizer
    def rates(self, A, C):
        return self.predict(A, C)

    def rates_batch(self, pairs):
        return self.predict_batch(pairs)

    def update(self, ci_index, A, C, rates, epochs=None):
        """Append a measurement and refine every model on the dataset."""
        self.dataset.append(ci_index, A, C, rates)
        epochs = epochs or self.config.update_epochs
        x = np.array(
            [decision_features(r.A, r.C) for r in self.dataset.records]
        )
        y = np.array([r.rates for r in self.dataset.records])
        for u, model in enumerate(self.models):
            w_z = self.topology.ue_bandwidth(u)
            model.train_epochs(x, y[:, u] / w_z, epochs, self.rng)
        self._cache = {}

    def download(self):
        """Immutable snapshot of the current model parameters."""
        return [m.flat_params() for m in self.models]

    def resize(self, topology, sample_fn=None):
        """Rebuild for a changed UE population (dynamic arrivals/departures).

        Fresh networks are pre-trained on the surrogate at the new input
        size; existing measurements are replayed with their decision
        matrices padded (or trimmed) to the new shape so learned behavior
        carries over for the surviving UEs.
        """
        old_records = self.dataset.records
        old_num_ue = self.topology.num_ue
        self.topology = topology
        self._build_models()
        self.pretrain(sample_fn)
        self.dataset = Dataset()
        num_bs, num_ue = topology.num_bs, topology.num_ue
        keep = min(old_num_ue, num_ue)
        for rec in old_records:
            A = np.zeros((num_bs, num_ue), dtype=int)
            C = np.zeros((num_bs, num_ue), dtype=int)
            A[:, :keep] = rec.A[:, :keep]
            C[:, :keep] = rec.C[:, :keep]
            rates = np.zeros(num_ue)
            rates[:keep] = rec.rates[:keep]
            # new UEs in replayed rows never had measurements; mark them
            # served nowhere and rate 0 so the replay stays consistent
            self.dataset.append(rec.ci_index, A, C, rates)
        if self.dataset.records:
            x = np.array(
                [decision_features(r.A, r.C) for r in self.dataset.records]
            )
            y = np.array([r.rates for r in self.dataset.records])
            for u in range(keep):
                w_z = self.topology.ue_bandwidth(u)
                self.models[u].train_epochs(
                    x, y[:, u] / w_z, self.config.update_epochs, self.rng
                )
        self._cache = {}
