"""Training loop: MSE on both target channels, Adam, step-wise LR halving."""

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Subset

from phasorloc.formats import write_columns

from .config import ToyNetConfig
from .data import PairedGridDataset, normalization_from_dataset
from .model import ToyMapNet


def train(dataset_dir, maps_dir, cfg: ToyNetConfig, out_dir):
    """Fit the toy net on a simulate+encode dataset.

    Writes `checkpoint.pt` and a `loss_curve.txt` column file (epoch,
    train_loss, val_loss) into out_dir and returns the checkpoint path.
    Deterministic for a fixed cfg.seed up to framework kernel variation
    (single-process CPU training is reproducible in practice).
    """
    torch.manual_seed(cfg.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    baseline, scale = normalization_from_dataset(dataset_dir)
    dataset = PairedGridDataset(Path(dataset_dir) / "frames", maps_dir,
                                baseline, scale)

    n_val = int(round(cfg.val_fraction * len(dataset)))
    val_indices = list(range(len(dataset) - n_val, len(dataset)))
    train_indices = list(range(len(dataset) - n_val))
    train_loader = DataLoader(Subset(dataset, train_indices),
                              batch_size=cfg.batch_size, shuffle=True,
                              generator=torch.Generator().manual_seed(cfg.seed))
    val_loader = DataLoader(Subset(dataset, val_indices),
                            batch_size=cfg.batch_size) if n_val else None

    model = ToyMapNet(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    scheduler = torch.optim.lr_scheduler.StepLR(
        optimizer, step_size=max(cfg.epochs // 4, 1), gamma=0.5)
    loss_fn = torch.nn.MSELoss()

    def evaluate(loader):
        model.eval()
        total = 0.0
        count = 0
        with torch.no_grad():
            for x, y in loader:
                total += loss_fn(model(x), y).item() * x.shape[0]
                count += x.shape[0]
        return total / max(count, 1)

    curve = []
    for epoch in range(cfg.epochs):
        model.train()
        total = 0.0
        count = 0
        for x, y in train_loader:
            optimizer.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            optimizer.step()
            total += loss.item() * x.shape[0]
            count += x.shape[0]
        scheduler.step()
        train_loss = total / max(count, 1)
        val_loss = evaluate(val_loader) if val_loader else float("nan")
        curve.append((epoch, train_loss, val_loss))
        print(f"epoch {epoch:3d}: train {train_loss:.6f} val {val_loss:.6f} "
              f"lr {scheduler.get_last_lr()[0]:.2e}")

    write_columns(out_dir / "loss_curve.txt",
                  ["epoch", "train_loss", "val_loss"],
                  np.asarray(curve, dtype=np.float64))

    final_val = evaluate(val_loader) if val_loader else float("nan")
    checkpoint_path = out_dir / "checkpoint.pt"
    torch.save({
        "state_dict": model.state_dict(),
        "config": cfg.__dict__,
        "input_baseline": baseline,
        "input_scale": scale,
        "frame_shape": dataset.frame_shape,
        "map_meta": dataset.map_meta,
        "val_indices": val_indices,
        "final_val_loss": final_val,
        "loss_curve": curve,
    }, checkpoint_path)
    return checkpoint_path
