"""Virtual lead vehicle for feedback without a visible reference.

The ghost drives at a fixed speed and exists only as an integrated gap.
Cues computed against it feel identical to cues against a real lead, but
the driver cannot see anything to anchor on. If the driver ignores the
cues long enough the virtual gap runs away; past the reset rails it snaps
back to the initial gap so the exercise can continue, and the reset is
counted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .coach import MIN_SPEED_MPS, GapState, compute_time_gap

INITIAL_GAP_M = 65.0
GHOST_SPEED_MPS = 29.0
RESET_FAR_M = 100.0
RESET_NEAR_M = -30.0


@dataclass(frozen=True)
class GhostState:
    virtual_gap: float
    v_ghost: float
    reset_count: int = 0


def init_ghost(v_ghost: float = GHOST_SPEED_MPS) -> GhostState:
    if v_ghost <= 0:
        raise ValueError(f"ghost speed must be positive, got {v_ghost}")
    return GhostState(virtual_gap=INITIAL_GAP_M, v_ghost=v_ghost, reset_count=0)


def step_ghost(state: GhostState, v_ego: float, dt: float) -> GhostState:
    """Advance the virtual gap one step of forward Euler.

    The gap grows while the ego is slower than the ghost. A post-step gap
    strictly beyond the rails (above RESET_FAR_M or below RESET_NEAR_M)
    resets to the initial gap and bumps reset_count; landing exactly on a
    rail does not reset.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    gap = state.virtual_gap + (state.v_ghost - v_ego) * dt
    if gap > RESET_FAR_M or gap < RESET_NEAR_M:
        return replace(state, virtual_gap=INITIAL_GAP_M, reset_count=state.reset_count + 1)
    return replace(state, virtual_gap=gap)


def ghost_gap_state(state: GhostState, v_ego: float, v_min: float = MIN_SPEED_MPS) -> GapState:
    """The ghost seen through the same GapState lens as a real lead."""
    return GapState(
        s=state.virtual_gap,
        delta_v=state.v_ghost - v_ego,
        tau=compute_time_gap(state.virtual_gap, v_ego, v_min),
    )
