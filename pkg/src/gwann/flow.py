"""Steady-state confined flow on the block-centred grid.

Solves div(T grad h) = Q with T = HK * b (isotropic per cell) using the
five-point stencil and harmonic-mean intercell transmissivity. Fixed-head
cells are eliminated from the linear system; all other boundary faces are
no-flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .aquifer import AquiferModel

RESIDUAL_TOL = 1e-10


class FlowSolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FlowField:
    """Solved heads and intercell flows.

    ``flow_zeta[r, c]`` is the volumetric flow (m^3/s) from cell ``(r, c)`` to
    ``(r, c + 1)``; ``flow_eta[r, c]`` from ``(r, c)`` to ``(r + 1, c)``.
    ``velocity`` holds the cell-centred effective velocity ``(u_zeta, u_eta)``
    with shape ``(n_rows, n_cols, 2)``.
    """

    head: np.ndarray
    flow_zeta: np.ndarray
    flow_eta: np.ndarray
    velocity: np.ndarray
    fixed_mask: np.ndarray
    recharge: np.ndarray
    residual: float

    @property
    def face_flux(self) -> tuple[np.ndarray, np.ndarray]:
        return self.flow_zeta, self.flow_eta

    def net_outflow(self) -> np.ndarray:
        """Signed sum of face flows leaving each cell (m^3/s)."""
        out = np.zeros_like(self.head)
        out[:, :-1] += self.flow_zeta
        out[:, 1:] -= self.flow_zeta
        out[:-1, :] += self.flow_eta
        out[1:, :] -= self.flow_eta
        return out


def intercell_conductances(model: AquiferModel) -> tuple[np.ndarray, np.ndarray]:
    """Harmonic-mean conductances (m^2/s) across zeta- and eta-faces."""
    g = model.grid
    trans = model.zones.hk_field(g) * g.thickness_b
    cz = 2.0 * trans[:, :-1] * trans[:, 1:] / (trans[:, :-1] + trans[:, 1:]) * g.delta_eta / g.delta_zeta
    ce = 2.0 * trans[:-1, :] * trans[1:, :] / (trans[:-1, :] + trans[1:, :]) * g.delta_zeta / g.delta_eta
    return cz, ce


def solve_steady_flow(model: AquiferModel, recharge: np.ndarray | None = None) -> FlowField:
    """Solve the steady-state flow problem for ``model``.

    Parameters
    ----------
    model : AquiferModel
        Validated aquifer description with at least one fixed-head cell.
    recharge : ndarray, optional
        Volumetric inflow per cell (m^3/s, positive entering). Defaults to
        zero everywhere.

    Returns
    -------
    FlowField
    """
    g = model.grid
    nr, nc = g.shape
    n = nr * nc
    fixed = model.boundaries.fixed_head_cells
    if not fixed:
        raise FlowSolverError("singular flow system: no fixed-head cell")
    q = np.zeros(g.shape) if recharge is None else np.asarray(recharge, dtype=float)

    cz, ce = intercell_conductances(model)
    idx = np.arange(n).reshape(nr, nc)
    rows = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    cols = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    cond = np.concatenate([cz.ravel(), ce.ravel()])
    off = sp.coo_matrix((-cond, (rows, cols)), shape=(n, n))
    a = (off + off.T).tocsr()
    a = a + sp.diags(-np.asarray(a.sum(axis=1)).ravel())  # positive diagonal

    fixed_mask = np.zeros(g.shape, dtype=bool)
    head = np.zeros(g.shape)
    for (r, c), h in fixed.items():
        fixed_mask[r, c] = True
        head[r, c] = h
    fm = fixed_mask.ravel()
    free = ~fm
    # A h = q on free cells; move known heads to the right-hand side.
    a_ff = a[free][:, free].tocsc()
    rhs = q.ravel()[free] - a[free][:, fm] @ head.ravel()[fm]
    if a_ff.shape[0]:
        h_free = spla.spsolve(a_ff, rhs)
        if not np.all(np.isfinite(h_free)):
            raise FlowSolverError("flow solve produced non-finite heads")
        scale = max(np.abs(rhs).max(), np.abs(a_ff @ h_free).max(), np.finfo(float).tiny)
        residual = float(np.abs(a_ff @ h_free - rhs).max() / scale)
        if residual > RESIDUAL_TOL:
            raise FlowSolverError(f"flow solve did not converge (relative residual {residual:.3e})")
        flat = head.ravel()
        flat[free] = h_free
        head = flat.reshape(g.shape)
    else:
        residual = 0.0

    flow_zeta = cz * (head[:, :-1] - head[:, 1:])
    flow_eta = ce * (head[:-1, :] - head[1:, :])
    field = FlowField(
        head=head,
        flow_zeta=flow_zeta,
        flow_eta=flow_eta,
        velocity=np.zeros(g.shape + (2,)),
        fixed_mask=fixed_mask,
        recharge=q,
        residual=residual,
    )
    object.__setattr__(field, "velocity", effective_velocity(field, model))
    return field


def effective_velocity(flow: FlowField, model: AquiferModel) -> np.ndarray:
    """Cell-centred effective velocity (m/s), shape ``(n_rows, n_cols, 2)``.

    Each component averages the flows through the cell's two faces normal to
    that axis (no-flow faces count as zero) and divides by the porous
    cross-section ``phi * b * face length``.
    """
    g = model.grid
    phi = model.transport.porosity_phi
    nr, nc = g.shape
    fz = np.zeros((nr, nc + 1))
    fz[:, 1:-1] = flow.flow_zeta
    fe = np.zeros((nr + 1, nc))
    fe[1:-1, :] = flow.flow_eta
    u = 0.5 * (fz[:, :-1] + fz[:, 1:]) / (phi * g.thickness_b * g.delta_eta)
    v = 0.5 * (fe[:-1, :] + fe[1:, :]) / (phi * g.thickness_b * g.delta_zeta)
    return np.stack([u, v], axis=-1)


def export_flow_grids(flow: FlowField, directory: str | Path) -> list[Path]:
    """Write head and velocity components as comma-delimited grids."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, arr in (
        ("head", flow.head),
        ("velocity_zeta", flow.velocity[..., 0]),
        ("velocity_eta", flow.velocity[..., 1]),
    ):
        p = directory / f"{name}.csv"
        np.savetxt(p, arr, delimiter=",", fmt="%.17g")
        paths.append(p)
    return paths
