import numpy as np
import pytest

from sstp import ModelConfig, MixtureComponent, SynthConfig, generate_synthetic, init_params


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SynthConfig(num_scenes=40, t_obs=6, t_pred=4), seed=3)


@pytest.fixture(scope="session")
def small_model():
    return ModelConfig(t_obs=6, t_pred=4, hidden_dim=16, latent_dim=8, num_modes=3)


@pytest.fixture(scope="session")
def small_params(small_model):
    return init_params(small_model, seed=11)


def constant_velocity_config(num_scenes, t_obs=6, t_pred=4):
    """All agents straight-line; the easiest thing the model can learn."""
    head = MixtureComponent(2, 6, 0.9, turn_prob=0.0)
    tail = MixtureComponent(20, 30, 0.1, speed_lo=2.0, speed_hi=5.0, turn_prob=0.0)
    return SynthConfig(num_scenes=num_scenes, t_obs=t_obs, t_pred=t_pred,
                       head=head, tail=tail, noise_std=0.01)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    reports = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            if "test_acceptance.py" in str(rep.nodeid):
                reports.append((rep.nodeid.split("::")[-1], outcome))
    if not reports:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in sorted(reports):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
