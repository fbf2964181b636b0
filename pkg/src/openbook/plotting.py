import logging
from pathlib import Path
from typing import List, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from openbook.errors import DomainError  # noqa: E402
from openbook.geometry import TWO_PI  # noqa: E402
from openbook.holomorphic import PageCurve  # noqa: E402
from openbook.profiles import Profile, perturb_profile  # noqa: E402

logger = logging.getLogger(__name__)

# fixed hash salt, no date: byte-reproducible output
SVG_RC = {"svg.hashsalt": "openbook", "svg.fonttype": "path", "path.simplify": False}


def _save(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("wrote %s", path)
    return path


def plot_profile(p: Profile, path: Union[str, Path], eps: Optional[float] = None, n: int = 2001) -> Path:
    """Three panels: the ``(f, g)`` path, ``D(rho)`` and ``beta(rho)``.

    Args:
        p: Unperturbed profile.
        path: SVG destination.
        eps: If positive, overlay the contact perturbation of ``p``.
        n: Samples on ``[0, 1 + delta)``.

    Returns:
        Path: ``path``.

    Raises:
        OSError: If ``path`` cannot be written.
    """
    rho = np.linspace(0.0, p.rho_max, n, endpoint=False)
    base = p.sample(rho)
    with matplotlib.rc_context(SVG_RC):
        fig, (ax_path, ax_d, ax_beta) = plt.subplots(1, 3, figsize=(12, 4))
        ax_path.plot(base.f, base.g, label="eps = 0")
        if eps:
            pert = perturb_profile(p, eps).sample(rho)
            ax_path.plot(pert.f, pert.g, linestyle="--", label=f"eps = {eps:g}")
        ax_path.plot([base.f[0]], [base.g[0]], marker="o", color="black")
        ax_path.set_xlabel("f")
        ax_path.set_ylabel("g")
        ax_path.set_title("(f, g)")
        ax_path.legend(loc="upper right")

        ax_d.plot(rho, base.D)
        ax_d.set_xlabel("rho")
        ax_d.set_ylabel("D = f g' - f' g")
        ax_d.set_title("D")

        core = rho > 0.0
        ax_beta.plot(rho[core], base.beta[core])
        ax_beta.set_yscale("log")
        ax_beta.set_xlabel("rho")
        ax_beta.set_ylabel("beta")
        ax_beta.set_title("beta")
        fig.tight_layout()
    return _save(fig, path)


def plot_foliation(leaves: List[PageCurve], path: Union[str, Path]) -> Path:
    """Two panels: ``a`` against ``rho`` per leaf, and the page fan around binding 0.

    The fan draws the trace ``rho (cos 2 pi phi0, sin 2 pi phi0)`` of every leaf in the
    solid torus of the first binding.

    Raises:
        DomainError: With fewer than two leaves.
        OSError: If ``path`` cannot be written.
    """
    if len(leaves) < 2:
        raise DomainError(f"plot_foliation needs at least 2 leaves, got {len(leaves)}")
    with matplotlib.rc_context(SVG_RC):
        fig, (ax_a, ax_fan) = plt.subplots(1, 2, figsize=(10, 5))
        for leaf in leaves:
            hc = leaf.half_cylinders[0]
            flat_rho = np.array([1.0 + 0.25, 1.0])
            ax_a.plot(np.concatenate([flat_rho, hc.rho]), np.concatenate([[leaf.a0, leaf.a0], hc.a]), linewidth=0.8)
            angle = TWO_PI * leaf.phi0
            ax_fan.plot(hc.rho * np.cos(angle), hc.rho * np.sin(angle), linewidth=0.8)
        ax_a.axvline(1.0, color="grey", linewidth=0.5)
        ax_a.set_xscale("symlog", linthresh=1e-3)
        ax_a.invert_xaxis()
        ax_a.set_xlabel("rho (flat part beyond 1)")
        ax_a.set_ylabel("a")
        ax_a.set_title("R-component along each leaf")
        ax_fan.set_aspect("equal")
        ax_fan.set_xlabel("x")
        ax_fan.set_ylabel("y")
        ax_fan.set_title(f"{len(leaves)} pages near the binding")
        fig.tight_layout()
    return _save(fig, path)
