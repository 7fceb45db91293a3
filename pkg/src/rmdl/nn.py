"""Neural network layers with forward and analytic backward passes.

Every layer caches what its backward pass needs during forward; the cache
is consumed exactly once by backward.  All parameters are float64 and are
initialized Glorot-uniform (biases zero, LSTM forget-gate bias 1) from the
generator handed to ``build``, so a (architecture, seed) pair rebuilds the
same model bit for bit.
"""
import numpy as np

from . import kernels
from .tensor import ShapeError


def sigmoid(x):
    """Logistic function, computed piecewise so large |x| saturates cleanly."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x):
    return np.maximum(0.0, np.asarray(x, dtype=np.float64))


def softmax(z):
    """Max-shifted softmax over the last axis; rows sum to 1."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def glorot_uniform(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: parameters, matching gradients, and a one-shot cache."""

    kind = None

    def __init__(self):
        self.params = {}
        self.grads = {}
        self._cache = None

    def build(self, input_shape, rng):
        """Allocate parameters for a per-sample input shape; returns the
        per-sample output shape."""
        raise NotImplementedError

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def hyper(self):
        """Kind-specific hyperparameters, JSON-friendly."""
        return {}

    def config(self):
        return {"kind": self.kind, **self.hyper()}

    def _take_cache(self):
        cache = self._cache
        if cache is None:
            raise RuntimeError(f"{self.kind}: backward called without a cached forward")
        self._cache = None
        return cache

    def zero_grads(self):
        for k in self.grads:
            self.grads[k][...] = 0.0


class Dense(Layer):
    kind = "dense"

    def __init__(self, units):
        super().__init__()
        self.units = int(units)

    def build(self, input_shape, rng):
        if len(input_shape) != 1:
            raise ShapeError(f"dense expects flat input, got {input_shape}")
        n_in = input_shape[0]
        self.params["W"] = glorot_uniform(rng, n_in, self.units, (n_in, self.units))
        self.params["b"] = np.zeros(self.units)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        return (self.units,)

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.params["W"].shape[0]:
            raise ShapeError(
                f"dense expects (B,{self.params['W'].shape[0]}), got {x.shape}")
        self._cache = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, grad):
        x = self._take_cache()
        self.grads["W"] += x.T @ grad
        self.grads["b"] += grad.sum(axis=0)
        return grad @ self.params["W"].T

    def hyper(self):
        return {"units": self.units}


class Sigmoid(Layer):
    kind = "sigmoid"

    def build(self, input_shape, rng):
        return input_shape

    def forward(self, x, train=False):
        y = sigmoid(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._take_cache()
        return grad * y * (1.0 - y)


class ReLU(Layer):
    kind = "relu"

    def build(self, input_shape, rng):
        return input_shape

    def forward(self, x, train=False):
        self._cache = x > 0
        return np.maximum(0.0, x)

    def backward(self, grad):
        return grad * self._take_cache()


class Tanh(Layer):
    kind = "tanh"

    def build(self, input_shape, rng):
        return input_shape

    def forward(self, x, train=False):
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._take_cache()
        return grad * (1.0 - y * y)


class Softmax(Layer):
    kind = "softmax"

    def build(self, input_shape, rng):
        return input_shape

    def forward(self, x, train=False):
        y = softmax(x)
        self._cache = y
        return y

    def backward(self, grad):
        y = self._take_cache()
        return y * (grad - np.sum(grad * y, axis=-1, keepdims=True))


class Flatten(Layer):
    kind = "flatten"

    def build(self, input_shape, rng):
        self._in_shape = tuple(input_shape)
        return (int(np.prod(input_shape)),)

    def forward(self, x, train=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._take_cache())


class Reshape(Layer):
    """Fixed per-sample reshape; used e.g. to read image rows as timesteps."""

    kind = "reshape"

    def __init__(self, target):
        super().__init__()
        self.target = tuple(int(t) for t in target)

    def build(self, input_shape, rng):
        if int(np.prod(input_shape)) != int(np.prod(self.target)):
            raise ShapeError(f"cannot reshape {input_shape} to {self.target}")
        return self.target

    def forward(self, x, train=False):
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.target)

    def backward(self, grad):
        return grad.reshape(self._take_cache())

    def hyper(self):
        return {"target": list(self.target)}


class Dropout(Layer):
    """Inverted dropout: keep with probability 1-p and rescale by 1/(1-p)
    at train time, identity at eval time."""

    kind = "dropout"

    def __init__(self, p):
        super().__init__()
        p = float(p)
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.rng = None

    def build(self, input_shape, rng):
        self.rng = rng
        return input_shape

    def forward(self, x, train=False):
        if not train or self.p == 0.0:
            self._cache = (None,)
            return x
        mask = self.rng.random(x.shape) >= self.p
        scale = 1.0 / (1.0 - self.p)
        self._cache = (mask,)
        return x * mask * scale

    def backward(self, grad):
        (mask,) = self._take_cache()
        if mask is None:
            return grad
        return grad * mask * (1.0 / (1.0 - self.p))

    def hyper(self):
        return {"p": self.p}


class Embedding(Layer):
    """Token-index lookup table; row 0 is the padding/unknown slot."""

    kind = "embedding"

    def __init__(self, vocab_size, dim):
        super().__init__()
        self.vocab_size = int(vocab_size)
        self.dim = int(dim)

    def build(self, input_shape, rng):
        if len(input_shape) != 1:
            raise ShapeError(f"embedding expects (L,) index input, got {input_shape}")
        W = glorot_uniform(rng, self.vocab_size, self.dim, (self.vocab_size, self.dim))
        W[0, :] = 0.0
        self.params["W"] = W
        self.grads = {"W": np.zeros_like(W)}
        return (input_shape[0], self.dim)

    def load_pretrained(self, vectors_by_index):
        """Overwrite rows with pretrained vectors, index -> vector."""
        for idx, vec in vectors_by_index.items():
            self.params["W"][idx, :] = vec

    def forward(self, x, train=False):
        idx = np.asarray(x)
        if not np.issubdtype(idx.dtype, np.integer):
            idx = idx.astype(np.int64)
        self._cache = idx
        return self.params["W"][idx]

    def backward(self, grad):
        idx = self._take_cache()
        np.add.at(self.grads["W"], idx.ravel(), grad.reshape(-1, self.dim))
        return np.zeros(idx.shape, dtype=np.float64)

    def hyper(self):
        return {"vocab_size": self.vocab_size, "dim": self.dim}


class Conv2D(Layer):
    """Valid cross-correlation with a square kernel over (B,H,W,C) input."""

    kind = "conv2d"

    def __init__(self, filters, kernel, stride=1):
        super().__init__()
        self.filters = int(filters)
        self.kernel = int(kernel)
        self.stride = int(stride)
        if self.kernel < 1 or self.stride < 1:
            raise ValueError("kernel and stride must be >= 1")

    def build(self, input_shape, rng):
        h, w, c = input_shape
        k = self.kernel
        if k > h or k > w:
            raise ShapeError(f"kernel {k} exceeds input extent {(h, w)}")
        fan_in = k * k * c
        fan_out = k * k * self.filters
        self.params["K"] = glorot_uniform(rng, fan_in, fan_out, (k, k, c, self.filters))
        self.params["b"] = np.zeros(self.filters)
        self.grads = {k_: np.zeros_like(v) for k_, v in self.params.items()}
        oh = (h - k) // self.stride + 1
        ow = (w - k) // self.stride + 1
        self._in_shape = (h, w, c)
        return (oh, ow, self.filters)

    def forward(self, x, train=False):
        if x.shape[1:] != self._in_shape:
            raise ShapeError(f"conv2d expects (B,)+{self._in_shape}, got {x.shape}")
        k, s = self.kernel, self.stride
        cols = kernels.im2col2d(np.ascontiguousarray(x), k, s)
        b, oh, ow, patch = cols.shape
        k2 = self.params["K"].reshape(patch, self.filters)
        out = cols.reshape(-1, patch) @ k2 + self.params["b"]
        self._cache = (cols, x.shape)
        return out.reshape(b, oh, ow, self.filters)

    def backward(self, grad):
        cols, x_shape = self._take_cache()
        b, oh, ow, patch = cols.shape
        g2 = grad.reshape(-1, self.filters)
        cols2 = cols.reshape(-1, patch)
        self.grads["K"] += (cols2.T @ g2).reshape(self.params["K"].shape)
        self.grads["b"] += g2.sum(axis=0)
        gcols = (g2 @ self.params["K"].reshape(patch, self.filters).T)
        gcols = np.ascontiguousarray(gcols.reshape(b, oh, ow, patch))
        return kernels.col2im2d(gcols, *x_shape, self.kernel, self.stride)

    def hyper(self):
        return {"filters": self.filters, "kernel": self.kernel, "stride": self.stride}


class Conv1D(Layer):
    """Valid cross-correlation along the length axis of (B,L,C) input."""

    kind = "conv1d"

    def __init__(self, filters, kernel, stride=1):
        super().__init__()
        self.filters = int(filters)
        self.kernel = int(kernel)
        self.stride = int(stride)
        if self.kernel < 1 or self.stride < 1:
            raise ValueError("kernel and stride must be >= 1")

    def build(self, input_shape, rng):
        l, c = input_shape
        k = self.kernel
        if k > l:
            raise ShapeError(f"kernel {k} exceeds input length {l}")
        fan_in = k * c
        fan_out = k * self.filters
        self.params["K"] = glorot_uniform(rng, fan_in, fan_out, (k, c, self.filters))
        self.params["b"] = np.zeros(self.filters)
        self.grads = {k_: np.zeros_like(v) for k_, v in self.params.items()}
        self._in_shape = (l, c)
        return ((l - k) // self.stride + 1, self.filters)

    def forward(self, x, train=False):
        if x.shape[1:] != self._in_shape:
            raise ShapeError(f"conv1d expects (B,)+{self._in_shape}, got {x.shape}")
        cols = kernels.im2col1d(np.ascontiguousarray(x), self.kernel, self.stride)
        b, ol, patch = cols.shape
        k2 = self.params["K"].reshape(patch, self.filters)
        out = cols.reshape(-1, patch) @ k2 + self.params["b"]
        self._cache = (cols, x.shape)
        return out.reshape(b, ol, self.filters)

    def backward(self, grad):
        cols, x_shape = self._take_cache()
        b, ol, patch = cols.shape
        g2 = grad.reshape(-1, self.filters)
        self.grads["K"] += (cols.reshape(-1, patch).T @ g2).reshape(self.params["K"].shape)
        self.grads["b"] += g2.sum(axis=0)
        gcols = g2 @ self.params["K"].reshape(patch, self.filters).T
        gcols = np.ascontiguousarray(gcols.reshape(b, ol, patch))
        return kernels.col2im1d(gcols, *x_shape, self.kernel, self.stride)

    def hyper(self):
        return {"filters": self.filters, "kernel": self.kernel, "stride": self.stride}


class MaxPool(Layer):
    """Window max over spatial axes; 2-d for rank-4 input, 1-d for rank-3.

    Gradient flows to the first maximum in the window's row-major scan.
    """

    kind = "maxpool"

    def __init__(self, window, stride=None):
        super().__init__()
        self.window = int(window)
        self.stride = int(stride) if stride is not None else self.window
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be >= 1")

    def build(self, input_shape, rng):
        w, s = self.window, self.stride
        if len(input_shape) == 3:
            h, wd, c = input_shape
            if w > h or w > wd:
                raise ShapeError(f"pool window {w} exceeds input extent {(h, wd)}")
            self._rank = 4
            return ((h - w) // s + 1, (wd - w) // s + 1, c)
        if len(input_shape) == 2:
            l, c = input_shape
            if w > l:
                raise ShapeError(f"pool window {w} exceeds input length {l}")
            self._rank = 3
            return ((l - w) // s + 1, c)
        raise ShapeError(f"maxpool expects rank 3 or 4 batches, got {input_shape}")

    def forward(self, x, train=False):
        x = np.ascontiguousarray(x)
        if self._rank == 4:
            out, idx = kernels.maxpool2d_forward(x, self.window, self.stride)
        else:
            out, idx = kernels.maxpool1d_forward(x, self.window, self.stride)
        self._cache = (idx, x.shape)
        return out

    def backward(self, grad):
        idx, x_shape = self._take_cache()
        grad = np.ascontiguousarray(grad)
        if self._rank == 4:
            return kernels.maxpool2d_backward(grad, idx, *x_shape, self.window, self.stride)
        return kernels.maxpool1d_backward(grad, idx, *x_shape, self.window, self.stride)

    def hyper(self):
        return {"window": self.window, "stride": self.stride}


class LSTM(Layer):
    """LSTM over (B,T,D) sequences.

    Gates follow the concatenated-input formulation: every gate sees
    [x_t, h_{t-1}] through its own weight matrix,

        i = sig(Wi.[x,h] + bi)      c~ = tanh(Wc.[x,h] + bc)
        f = sig(Wf.[x,h] + bf)      C  = i*c~ + f*C_prev
        o = sig(Wo.[x,h] + bo)      h  = o*tanh(C)

    Backward is full BPTT across the whole (padded) sequence.
    """

    kind = "lstm"
    _GATES = ("i", "c", "f", "o")

    def __init__(self, units, return_sequences=False):
        super().__init__()
        self.units = int(units)
        self.return_sequences = bool(return_sequences)

    def build(self, input_shape, rng):
        t, d = input_shape
        u = self.units
        for g in self._GATES:
            self.params[f"W{g}"] = glorot_uniform(rng, d + u, u, (d + u, u))
        for g in self._GATES:
            self.params[f"b{g}"] = np.ones(u) if g == "f" else np.zeros(u)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._in_dim = d
        return (t, u) if self.return_sequences else (u,)

    def _packed(self):
        w = np.concatenate([self.params[f"W{g}"] for g in self._GATES], axis=1)
        b = np.concatenate([self.params[f"b{g}"] for g in self._GATES])
        return w, b

    def step(self, x_t, h_prev, c_prev):
        """One timestep; returns (h, C, gate cache)."""
        u = self.units
        w, b = self._packed()
        z = np.concatenate([x_t, h_prev], axis=1)
        a = z @ w + b
        i = sigmoid(a[:, :u])
        c_bar = np.tanh(a[:, u:2 * u])
        f = sigmoid(a[:, 2 * u:3 * u])
        o = sigmoid(a[:, 3 * u:])
        c = i * c_bar + f * c_prev
        tc = np.tanh(c)
        h = o * tc
        return h, c, {"z": z, "i": i, "c_bar": c_bar, "f": f, "o": o,
                      "c": c, "tc": tc, "c_prev": c_prev}

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self._in_dim:
            raise ShapeError(f"lstm expects (B,T,{self._in_dim}), got {x.shape}")
        b, t, _ = x.shape
        h = np.zeros((b, self.units))
        c = np.zeros((b, self.units))
        steps = []
        hs = np.empty((b, t, self.units))
        for ti in range(t):
            h, c, cache = self.step(x[:, ti, :], h, c)
            steps.append(cache)
            hs[:, ti, :] = h
        self._cache = (steps, x.shape)
        return hs if self.return_sequences else h

    def backward(self, grad):
        steps, x_shape = self._take_cache()
        b, t, d = x_shape
        u = self.units
        w, _ = self._packed()
        gw = np.zeros_like(w)
        gb = np.zeros(4 * u)
        gx = np.empty(x_shape)
        dh_next = np.zeros((b, u))
        dc_next = np.zeros((b, u))
        for ti in range(t - 1, -1, -1):
            s = steps[ti]
            if self.return_sequences:
                dh = grad[:, ti, :] + dh_next
            else:
                dh = (grad if ti == t - 1 else 0.0) + dh_next
            do = dh * s["tc"]
            dc = dc_next + dh * s["o"] * (1.0 - s["tc"] ** 2)
            di = dc * s["c_bar"]
            dcb = dc * s["i"]
            df = dc * s["c_prev"]
            da = np.concatenate([
                di * s["i"] * (1.0 - s["i"]),
                dcb * (1.0 - s["c_bar"] ** 2),
                df * s["f"] * (1.0 - s["f"]),
                do * s["o"] * (1.0 - s["o"]),
            ], axis=1)
            gw += s["z"].T @ da
            gb += da.sum(axis=0)
            dz = da @ w.T
            gx[:, ti, :] = dz[:, :d]
            dh_next = dz[:, d:]
            dc_next = dc * s["f"]
        for gi, g in enumerate(self._GATES):
            self.grads[f"W{g}"] += gw[:, gi * u:(gi + 1) * u]
            self.grads[f"b{g}"] += gb[gi * u:(gi + 1) * u]
        return gx

    def hyper(self):
        return {"units": self.units, "return_sequences": self.return_sequences}


class GRU(Layer):
    """GRU over (B,T,D) sequences.

    Update/reset gates use sigmoid, the candidate uses tanh, and the new
    state keeps z-weighted history:

        z = sig(Wz.x + Uz.h_prev + bz)
        r = sig(Wr.x + Ur.h_prev + br)
        h = z*h_prev + (1-z)*tanh(Wh.x + Uh.(r*h_prev) + bh)
    """

    kind = "gru"

    def __init__(self, units, return_sequences=False):
        super().__init__()
        self.units = int(units)
        self.return_sequences = bool(return_sequences)

    def build(self, input_shape, rng):
        t, d = input_shape
        u = self.units
        for g in ("z", "r", "h"):
            self.params[f"W{g}"] = glorot_uniform(rng, d, u, (d, u))
            self.params[f"U{g}"] = glorot_uniform(rng, u, u, (u, u))
            self.params[f"b{g}"] = np.zeros(u)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        self._in_dim = d
        return (t, u) if self.return_sequences else (u,)

    def step(self, x_t, h_prev):
        """One timestep; returns (h, gate cache)."""
        p = self.params
        wg = np.concatenate([p["Wz"], p["Wr"]], axis=1)
        ug = np.concatenate([p["Uz"], p["Ur"]], axis=1)
        bg = np.concatenate([p["bz"], p["br"]])
        u = self.units
        gates = sigmoid(x_t @ wg + h_prev @ ug + bg)
        z, r = gates[:, :u], gates[:, u:]
        q = r * h_prev
        h_bar = np.tanh(x_t @ p["Wh"] + q @ p["Uh"] + p["bh"])
        h = z * h_prev + (1.0 - z) * h_bar
        return h, {"x": x_t, "h_prev": h_prev, "z": z, "r": r, "q": q, "h_bar": h_bar}

    def forward(self, x, train=False):
        if x.ndim != 3 or x.shape[2] != self._in_dim:
            raise ShapeError(f"gru expects (B,T,{self._in_dim}), got {x.shape}")
        b, t, _ = x.shape
        h = np.zeros((b, self.units))
        steps = []
        hs = np.empty((b, t, self.units))
        for ti in range(t):
            h, cache = self.step(x[:, ti, :], h)
            steps.append(cache)
            hs[:, ti, :] = h
        self._cache = (steps, x.shape)
        return hs if self.return_sequences else h

    def backward(self, grad):
        steps, x_shape = self._take_cache()
        b, t, d = x_shape
        u = self.units
        p, g = self.params, self.grads
        gx = np.empty(x_shape)
        dh_next = np.zeros((b, u))
        for ti in range(t - 1, -1, -1):
            s = steps[ti]
            if self.return_sequences:
                dh = grad[:, ti, :] + dh_next
            else:
                dh = (grad if ti == t - 1 else 0.0) + dh_next
            dz = dh * (s["h_prev"] - s["h_bar"])
            da = dh * (1.0 - s["z"]) * (1.0 - s["h_bar"] ** 2)
            dq = da @ p["Uh"].T
            dr = dq * s["h_prev"]
            daz = dz * s["z"] * (1.0 - s["z"])
            dar = dr * s["r"] * (1.0 - s["r"])
            g["Wh"] += s["x"].T @ da
            g["Uh"] += s["q"].T @ da
            g["bh"] += da.sum(axis=0)
            g["Wz"] += s["x"].T @ daz
            g["Uz"] += s["h_prev"].T @ daz
            g["bz"] += daz.sum(axis=0)
            g["Wr"] += s["x"].T @ dar
            g["Ur"] += s["h_prev"].T @ dar
            g["br"] += dar.sum(axis=0)
            gx[:, ti, :] = daz @ p["Wz"].T + dar @ p["Wr"].T + da @ p["Wh"].T
            dh_next = dh * s["z"] + dq * s["r"] + daz @ p["Uz"].T + dar @ p["Ur"].T
        return gx

    def hyper(self):
        return {"units": self.units, "return_sequences": self.return_sequences}


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Dense, Sigmoid, ReLU, Tanh, Softmax, Flatten, Reshape,
                Dropout, Embedding, Conv2D, Conv1D, MaxPool, LSTM, GRU)
}


def layer_from_config(cfg):
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    return LAYER_KINDS[kind](**cfg)


class Network:
    """Plain layer chain: forward produces logits, backward fills grads."""

    def __init__(self, layers):
        self.layers = list(layers)
        self.rng = None

    def build(self, input_shape, rng):
        self.rng = rng
        shape = tuple(input_shape)
        for layer in self.layers:
            shape = layer.build(shape, rng)
        self.output_shape = shape
        return shape

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grads(self):
        for layer in self.layers:
            layer.zero_grads()

    def named_params(self):
        """Stable (name, array) listing, layer order then key order."""
        out = []
        for i, layer in enumerate(self.layers):
            for key in sorted(layer.params):
                out.append((f"{i}.{layer.kind}.{key}", layer.params[key]))
        return out

    def param_arrays(self):
        return [arr for _, arr in self.named_params()]

    def grad_arrays(self):
        out = []
        for layer in self.layers:
            for key in sorted(layer.params):
                out.append(layer.grads[key])
        return out

    def config(self):
        return [layer.config() for layer in self.layers]


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of the true class under softmax.

    Returns (loss, grad wrt logits); grad already carries the 1/B factor.
    """
    labels = np.asarray(labels)
    b, k = logits.shape
    if labels.shape != (b,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {b}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    shifted = logits - np.max(logits, axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    logp = shifted - lse
    loss = -float(np.mean(logp[np.arange(b), labels]))
    grad = np.exp(logp)
    grad[np.arange(b), labels] -= 1.0
    return loss, grad / b
