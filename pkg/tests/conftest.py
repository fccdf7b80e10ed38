import sys
import time
from dataclasses import dataclass
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from verdicts import CRITERIA  # noqa: E402
from utrnet.data import load_dataset  # noqa: E402
from utrnet.model import ModelConfig  # noqa: E402
from utrnet.synthgen import SynthConfig, generate_dataset  # noqa: E402
from utrnet.trainer import TrainConfig, train  # noqa: E402

# (backbone, words per line, batch size, iteration budget)
OVERFIT_SETUPS = {
    "unet": (2, 8, 3000),
    "hrnet": (1, 4, 4500),
}


@dataclass
class OverfitRun:
    data_dir: Path
    out_dir: Path
    result: object
    seconds: float


def _overfit(tmp_path_factory, backbone: str) -> OverfitRun:
    words, batch, budget = OVERFIT_SETUPS[backbone]
    root = tmp_path_factory.mktemp(f"overfit_{backbone}")
    data = generate_dataset(root / "data", n=32, config=SynthConfig(max_words=words), seed=0)
    samples, charset = load_dataset(data)
    cfg = TrainConfig(
        batch_size=batch,
        max_iter=budget,
        eval_every=50,
        target_accuracy=0.99,
        model=ModelConfig(backbone=backbone),
    )
    start = time.perf_counter()
    with open(root / "train.log", "w", encoding="utf-8") as log:
        result = train(cfg, samples, charset, out_dir=root / "run", log_file=log)
    return OverfitRun(data, root / "run", result, time.perf_counter() - start)


@pytest.fixture(scope="session")
def overfit_unet(tmp_path_factory):
    return _overfit(tmp_path_factory, "unet")


@pytest.fixture(scope="session")
def overfit_hrnet(tmp_path_factory):
    return _overfit(tmp_path_factory, "hrnet")


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
