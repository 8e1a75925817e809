import numpy as np
import pytest

from dptsim import engine, model


def random_state(space: str, n: int, seed: int = 0) -> engine.StateVector:
    rng = np.random.Generator(np.random.PCG64(seed))
    dim = (1 << n) if space == "full" else n + 1
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return engine.StateVector(amps / np.linalg.norm(amps), space, 0.0)


def uniform_model(n: int, lam: float, hx: float) -> model.HamiltonianModel:
    m = np.full((n, n), lam)
    np.fill_diagonal(m, 0.0)
    return model.HamiltonianModel(lam=m, hx=hx)


def random_model(n: int, seed: int = 0, hx: float | None = None,
                 phases: bool = False) -> model.HamiltonianModel:
    rng = np.random.Generator(np.random.PCG64(seed))
    lam = rng.normal(scale=0.02, size=(n, n))
    lam = (lam + lam.T) / 2.0
    np.fill_diagonal(lam, 0.0)
    return model.HamiltonianModel(
        lam=lam,
        hx=rng.uniform(0.01, 0.05) if hx is None else hx,
        phases=rng.uniform(0, 2 * np.pi, n) if phases else None,
    )


@pytest.fixture
def device8() -> model.DeviceSpec:
    rng = np.random.Generator(np.random.PCG64(7))
    return model.DeviceSpec(
        n_qubits=8,
        g=model.mhz_to_radns(rng.uniform(24.0, 30.0, 8)),
        delta=float(model.mhz_to_radns(-450.0)),
        f0=rng.uniform(0.95, 0.99, 8),
        f1=rng.uniform(0.88, 0.95, 8),
    )
