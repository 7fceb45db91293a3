"""First-order optimizers.

Each optimizer binds to a fixed list of parameter arrays and updates them
in place from a matching list of gradient arrays.  Per-parameter state
(velocities, moment estimates) lives on the optimizer and can be dumped /
restored for checkpointing.  A non-finite gradient anywhere rejects the
whole step.
"""
import numpy as np


class Optimizer:
    """Shared plumbing: parameter binding, finite checks, state dump."""

    name = None
    _state_keys = ()

    def __init__(self, lr):
        lr = float(lr)
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.params = None

    def bind(self, params):
        """Attach to the parameter arrays this optimizer will update."""
        self.params = list(params)
        self._init_state()
        return self

    def _init_state(self):
        pass

    def step(self, grads):
        if self.params is None:
            raise RuntimeError("optimizer is not bound to parameters")
        grads = list(grads)
        if len(grads) != len(self.params):
            raise ValueError(
                f"got {len(grads)} gradients for {len(self.params)} parameters")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient; step rejected")
        self._apply(grads)

    def _apply(self, grads):
        raise NotImplementedError

    def hyper(self):
        return {"lr": self.lr}

    def state_dict(self):
        """Slot arrays plus counters, keyed for the checkpoint writer."""
        state = {}
        for key in self._state_keys:
            for i, arr in enumerate(getattr(self, key)):
                state[f"{key}.{i}"] = arr
        return state

    def load_state_dict(self, state):
        for key in self._state_keys:
            slots = getattr(self, key)
            for i in range(len(slots)):
                arr = state[f"{key}.{i}"]
                if arr.shape != slots[i].shape:
                    raise ValueError(
                        f"state {key}.{i} shape {arr.shape} != {slots[i].shape}")
                slots[i][...] = arr


class SGD(Optimizer):
    """Vanilla gradient descent: theta -= lr * g."""

    name = "sgd"

    def __init__(self, lr=1e-2):
        super().__init__(lr)

    def _apply(self, grads):
        for p, g in zip(self.params, grads):
            p -= self.lr * g


class Momentum(Optimizer):
    """Heavy-ball momentum: v = gamma*v + lr*g; theta -= v."""

    name = "momentum"
    _state_keys = ("v",)

    def __init__(self, lr=1e-2, gamma=0.9):
        super().__init__(lr)
        self.gamma = float(gamma)

    def _init_state(self):
        self.v = [np.zeros_like(p) for p in self.params]

    def _apply(self, grads):
        for p, v, g in zip(self.params, self.v, grads):
            v *= self.gamma
            v += self.lr * g
            p -= v

    def hyper(self):
        return {"lr": self.lr, "gamma": self.gamma}


class RMSProp(Optimizer):
    """Running mean of squared gradients scales the step.

    v = rho*v + (1-rho)*g^2; theta -= lr * g / (sqrt(v) + eps).
    No bias correction on v.
    """

    name = "rmsprop"
    _state_keys = ("v",)

    def __init__(self, lr=1e-3, rho=0.9, eps=1e-8):
        super().__init__(lr)
        self.rho = float(rho)
        self.eps = float(eps)

    def _init_state(self):
        self.v = [np.zeros_like(p) for p in self.params]

    def _apply(self, grads):
        for p, v, g in zip(self.params, self.v, grads):
            v *= self.rho
            v += (1.0 - self.rho) * g * g
            p -= self.lr * g / (np.sqrt(v) + self.eps)

    def hyper(self):
        return {"lr": self.lr, "rho": self.rho, "eps": self.eps}


class Adam(Optimizer):
    """Adam with bias-corrected first and second moments.

    t advances before the update, so the first step uses t=1:
    m_hat = m/(1-beta1^t), v_hat = v/(1-beta2^t),
    theta -= lr * m_hat / (sqrt(v_hat) + eps).
    """

    name = "adam"
    _state_keys = ("m", "v")

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0

    def _init_state(self):
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def _apply(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v, g in zip(self.params, self.m, self.v, grads):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def hyper(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps}

    def state_dict(self):
        state = super().state_dict()
        state["t"] = np.array([self.t], dtype=np.float64)
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        self.t = int(state["t"][0])


OPTIMIZERS = {cls.name: cls for cls in (SGD, Momentum, RMSProp, Adam)}

# Pool drawn from when an ensemble assigns optimizers at random.
RANDOM_POOL = ("adam", "rmsprop")


def make_optimizer(name, **hyper):
    if name not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {name!r}")
    return OPTIMIZERS[name](**hyper)
