import time

import pytest

# acceptance criteria record one line each here; printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record(name: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    print(ACCEPTANCE_LINES[-1])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def shapes():
    from wvae.shapes import ShapesDataset

    return ShapesDataset()


# Desk-scale architecture: see README "Acceptance".
DESK = dict(latent_dim=10, hidden=(256, 128), batch_size=128, epochs=30)
SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def desk_runs(shapes):
    """Plain-VAE training runs on the full shapes set, one per seed, trained once per session."""
    from wvae.objectives import TrainConfig, train

    runs, seconds = {}, {}
    for seed in SEEDS:
        t = time.perf_counter()
        runs[seed] = train(shapes, TrainConfig(objective="vae", seed=seed, **DESK))
        seconds[seed] = time.perf_counter() - t
    return runs, seconds


@pytest.fixture(scope="session")
def beta4_run(shapes):
    from wvae.objectives import TrainConfig, train

    return train(shapes, TrainConfig(objective="beta_vae", beta=4.0, seed=0, **DESK))
