import numpy as np

from ovavss.numcore.nn import Parameter


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: int,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """One AdamW update, in place on param, m and v (decoupled weight decay)."""
    b1, b2 = betas
    if weight_decay:
        param *= 1.0 - lr * weight_decay
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**t)
    v_hat = v / (1.0 - b2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamW:
    """AdamW over named parameters; weight decay skips vectors (biases, norms)."""

    def __init__(
        self,
        params: dict[str, Parameter],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.05,
    ):
        self.params = {name: p for name, p in params.items() if p.requires_grad}
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def step(self) -> None:
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            decay = self.weight_decay if p.ndim >= 2 else 0.0
            adam_step(p.data, p.grad, self.m[name], self.v[name], self.t, self.lr, self.betas, self.eps, decay)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {"optim.t": np.array([float(self.t)])}
        for name in self.params:
            state[f"optim.m.{name}"] = self.m[name]
            state[f"optim.v.{name}"] = self.v[name]
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["optim.t"][0])
        for name in self.params:
            self.m[name] = np.array(state[f"optim.m.{name}"], dtype=np.float64)
            self.v[name] = np.array(state[f"optim.v.{name}"], dtype=np.float64)


class StepDecay:
    """Learning rate multiplied by `factor` once `at` of the total steps have run."""

    def __init__(self, base_lr: float, total_steps: int, at: float = 0.88, factor: float = 0.1):
        self.base_lr = base_lr
        self.milestone = int(round(total_steps * at))
        self.factor = factor

    def lr_at(self, step: int) -> float:
        return self.base_lr * (self.factor if step >= self.milestone else 1.0)
