"""Feedforward network for binary contact-type classification.

Small from-scratch MLP (numpy): tanh hidden layers, 2-way softmax output,
cross-entropy loss with an L2 penalty on the weights, trained with Adam.
The estimator follows the sklearn protocol (fit / predict / predict_proba /
get_params / set_params) so it composes with standard tooling, and the
softmax maximum is used directly as the prediction probability downstream.

Inputs are z-scored with constants estimated on the training rows only and
stored in the model.  Training is single-threaded and fully deterministic
for a fixed seed.
"""

import json

import numpy as np

from .errors import EmptyClassError, NotTrainedError, SplitViolation

MODEL_FORMAT_VERSION = 1


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class MLPContactClassifier:
    """Binary MLP classifier over momentum-observer force features."""

    def __init__(self, hidden_layer_sizes=(32,), l2=1e-3, learning_rate=1e-3,
                 beta1=0.9, beta2=0.999, adam_eps=1e-8, batch_size=256,
                 max_epochs=200, patience=20, val_fraction=0.1, seed=0):
        self.hidden_layer_sizes = tuple(hidden_layer_sizes)
        self.l2 = l2
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.seed = seed

    # -- sklearn protocol -------------------------------------------------

    _param_names = ("hidden_layer_sizes", "l2", "learning_rate", "beta1",
                    "beta2", "adam_eps", "batch_size", "max_epochs",
                    "patience", "val_fraction", "seed")

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params):
        for k, v in params.items():
            if k not in self._param_names:
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    # -- internals ---------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotTrainedError("classifier used before fit()")

    def _init_network(self, n_features, rng):
        sizes = [n_features, *self.hidden_layer_sizes, 2]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            weights.append(rng.normal(0.0, scale, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return sizes, weights, biases

    def _forward(self, Xn, weights, biases):
        """Returns activations per layer; last entry is the softmax output."""
        acts = [Xn]
        a = Xn
        for W, b in zip(weights[:-1], biases[:-1]):
            a = np.tanh(a @ W + b)
            acts.append(a)
        acts.append(_softmax(a @ weights[-1] + biases[-1]))
        return acts

    def _loss_grads(self, Xn, Y, weights, biases):
        """Cross-entropy + L2 loss and its gradients (backprop)."""
        n = Xn.shape[0]
        acts = self._forward(Xn, weights, biases)
        probs = acts[-1]
        ce = -np.mean(np.sum(Y * np.log(np.maximum(probs, 1e-300)), axis=1))
        loss = ce + self.l2 * sum(float(np.sum(W * W)) for W in weights)
        gW = [None] * len(weights)
        gb = [None] * len(biases)
        delta = (probs - Y) / n
        for li in range(len(weights) - 1, -1, -1):
            gW[li] = acts[li].T @ delta + 2.0 * self.l2 * weights[li]
            gb[li] = delta.sum(axis=0)
            if li > 0:
                delta = (delta @ weights[li].T) * (1.0 - acts[li] ** 2)
        return loss, gW, gb

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y):
        """Train with Adam and early stopping on a carved-out validation split.

        Keeps the parameters of the best validation epoch.  Deterministic
        for fixed (seed, data).
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        classes, y_idx = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise EmptyClassError("training data contains a single class")
        if len(classes) > 2:
            raise ValueError("binary classifier: expected exactly 2 classes")
        self.classes_ = classes

        rng = np.random.default_rng(self.seed)
        self.feature_mean_ = X.mean(axis=0)
        self.feature_std_ = np.where(X.std(axis=0) > 1e-12, X.std(axis=0), 1.0)
        Xn = (X - self.feature_mean_) / self.feature_std_
        Y = np.eye(2)[y_idx]

        n = len(Xn)
        n_val = int(round(self.val_fraction * n))
        order = rng.permutation(n)
        val_idx, tr_idx = order[:n_val], order[n_val:]
        if n_val == 0 or len(np.unique(y_idx[tr_idx])) < 2:
            tr_idx, val_idx = order, order[:0]
        Xtr, Ytr = Xn[tr_idx], Y[tr_idx]
        Xval, Yval = Xn[val_idx], Y[val_idx]

        self.layer_sizes_, weights, biases = self._init_network(X.shape[1], rng)
        mW = [np.zeros_like(W) for W in weights]
        vW = [np.zeros_like(W) for W in weights]
        mb = [np.zeros_like(b) for b in biases]
        vb = [np.zeros_like(b) for b in biases]
        step = 0
        best = (np.inf, None, None, -1)
        history = []
        wait = 0
        for epoch in range(self.max_epochs):
            perm = rng.permutation(len(Xtr))
            ep_loss = 0.0
            nb = 0
            for start in range(0, len(Xtr), self.batch_size):
                idx = perm[start:start + self.batch_size]
                loss, gW, gb = self._loss_grads(Xtr[idx], Ytr[idx], weights, biases)
                ep_loss += loss
                nb += 1
                step += 1
                c1 = 1.0 - self.beta1 ** step
                c2 = 1.0 - self.beta2 ** step
                for li in range(len(weights)):
                    mW[li] = self.beta1 * mW[li] + (1 - self.beta1) * gW[li]
                    vW[li] = self.beta2 * vW[li] + (1 - self.beta2) * gW[li] ** 2
                    weights[li] -= self.learning_rate * (mW[li] / c1) / (
                        np.sqrt(vW[li] / c2) + self.adam_eps)
                    mb[li] = self.beta1 * mb[li] + (1 - self.beta1) * gb[li]
                    vb[li] = self.beta2 * vb[li] + (1 - self.beta2) * gb[li] ** 2
                    biases[li] -= self.learning_rate * (mb[li] / c1) / (
                        np.sqrt(vb[li] / c2) + self.adam_eps)
            rec = {"epoch": epoch, "train_loss": ep_loss / max(nb, 1)}
            rec["train_accuracy"] = float(np.mean(
                np.argmax(self._forward(Xtr, weights, biases)[-1], axis=1)
                == np.argmax(Ytr, axis=1)))
            if len(Xval):
                probs = self._forward(Xval, weights, biases)[-1]
                val_loss = float(-np.mean(np.sum(
                    Yval * np.log(np.maximum(probs, 1e-300)), axis=1)))
                rec["val_loss"] = val_loss
                rec["val_accuracy"] = float(np.mean(
                    np.argmax(probs, axis=1) == np.argmax(Yval, axis=1)))
                history.append(rec)
                if val_loss < best[0] - 1e-9:
                    best = (val_loss, [W.copy() for W in weights],
                            [b.copy() for b in biases], epoch)
                    wait = 0
                else:
                    wait += 1
                    if wait >= self.patience:
                        break
            else:
                history.append(rec)
        if best[1] is not None:
            weights, biases = best[1], best[2]
        self.weights_ = weights
        self.biases_ = biases
        self.history_ = history
        return self

    def predict_proba(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        Xn = (X - self.feature_mean_) / self.feature_std_
        return self._forward(Xn, self.weights_, self.biases_)[-1]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))

    # -- persistence (self-describing flat JSON file) ----------------------

    def save(self, path, meta=None):
        self._check_fitted()
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "classes": [str(c) for c in self.classes_],
            "layer_sizes": list(self.layer_sizes_),
            "feature_mean": self.feature_mean_.tolist(),
            "feature_std": self.feature_std_.tolist(),
            "weights": [W.reshape(-1).tolist() for W in self.weights_],
            "biases": [b.tolist() for b in self.biases_],
            "params": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in self.get_params().items()},
            "meta": meta or {},
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')}")
        params = dict(doc["params"])
        params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
        model = cls(**params)
        sizes = doc["layer_sizes"]
        model.layer_sizes_ = sizes
        model.classes_ = np.array(doc["classes"])
        model.feature_mean_ = np.array(doc["feature_mean"], dtype=float)
        model.feature_std_ = np.array(doc["feature_std"], dtype=float)
        model.weights_ = [
            np.array(w, dtype=float).reshape(a, b)
            for w, a, b in zip(doc["weights"], sizes[:-1], sizes[1:])]
        model.biases_ = [np.array(b, dtype=float) for b in doc["biases"]]
        model.meta_ = doc.get("meta", {})
        return model


def gradient_check(model, X, y, h=1e-6):
    """Max relative error between backprop and central finite differences.

    Uses an initialized (untrained) network so the check is independent of
    training; the relative error is |g_bp - g_fd| / max(|g_bp|, |g_fd|, 1e-8)
    maximized over all parameters.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, y_idx = np.unique(y, return_inverse=True)
    Y = np.eye(2)[y_idx]
    rng = np.random.default_rng(model.seed)
    _, weights, biases = model._init_network(X.shape[1], rng)

    def loss_of(ws, bs):
        return model._loss_grads(X, Y, ws, bs)[0]

    _, gW, gb = model._loss_grads(X, Y, weights, biases)
    worst = 0.0
    for li in range(len(weights)):
        for arr, grad in ((weights[li], gW[li]), (biases[li], gb[li])):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                lp = loss_of(weights, biases)
                flat[j] = orig - h
                lm = loss_of(weights, biases)
                flat[j] = orig
                fd = (lp - lm) / (2.0 * h)
                denom = max(abs(gflat[j]), abs(fd), 1e-8)
                worst = max(worst, abs(gflat[j] - fd) / denom)
    return worst


def check_split(config_ids, held_out):
    """Reject feature rows from the held-out joint configuration."""
    config_ids = np.asarray(config_ids)
    if np.any(config_ids == held_out):
        raise SplitViolation(
            f"training rows include held-out configuration {held_out}")


def grid_search(X, y, grid, validation=0.2, seed=0, base_params=None):
    """Exhaustive search over (hidden layers, width, l2).

    grid: dict with keys 'hidden_layers' (list of layer counts), 'widths'
    (list of neurons per layer) and 'l2' (list of penalties).  validation
    is either a fraction carved from (X, y) or an (X_val, y_val) tuple.
    Returns (best_model, best_config, table); best cell by validation
    accuracy, ties broken by fewer parameters, then lower l2 index.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if isinstance(validation, tuple):
        Xtr, ytr = X, y
        Xval, yval = validation
    else:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(X))
        n_val = int(round(float(validation) * len(X)))
        val_idx, tr_idx = order[:n_val], order[n_val:]
        Xtr, ytr = X[tr_idx], y[tr_idx]
        Xval, yval = X[val_idx], y[val_idx]

    base = dict(base_params or {})
    table = []
    best = None
    for n_layers in grid["hidden_layers"]:
        for width in grid["widths"]:
            for l2_index, l2 in enumerate(grid["l2"]):
                params = dict(base)
                params.update(hidden_layer_sizes=(width,) * n_layers,
                              l2=l2, seed=seed)
                model = MLPContactClassifier(**params).fit(Xtr, ytr)
                acc = model.score(Xval, yval)
                n_params = sum(W.size for W in model.weights_) + \
                    sum(b.size for b in model.biases_)
                cell = {"hidden_layers": n_layers, "width": width, "l2": l2,
                        "val_accuracy": acc, "n_params": n_params}
                table.append(cell)
                key = (acc, -n_params, -l2_index)
                if best is None or key > best[0]:
                    best = (key, model, cell)
    return best[1], best[2], table
