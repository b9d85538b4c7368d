"""Clustered multipath channel with per-cluster Doppler.

Each cluster is a single specular ray with its own delay, departure
direction (azimuth and elevation) and arrival azimuth. The per-RB channel is
the RB-center frequency response of the sum of clusters. Three presets stand
in for the CDL-B/C/D scenarios used in the trade-off study.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingState, UnknownKind, ConfigError

SPEED_OF_LIGHT = 299_792_458.0
RB_BANDWIDTH_HZ = 12 * 15e3
DOWNLINK_CARRIER_HZ = 2.12e9

SHORT_DELAY_SPREAD = 363e-9
LONG_DELAY_SPREAD = 8000e-9
SPEED_PRESETS = {"3kmh": 3 / 3.6, "60kmh": 60 / 3.6}

# kind -> (k_factor, n_clusters, angle spread in degrees)
PRESETS = {
    "los_high_corr": (10.0, 4, 5.0),
    "nlos_rich": (0.0, 12, 60.0),
    "nlos_long_delay": (0.0, 12, 60.0),
}
KINDS = tuple(PRESETS)


@dataclass(frozen=True, eq=False)
class ChannelProfile:
    """Cluster geometry of one scenario.

    Angles are in radians: ``aod``/``eod`` are departure azimuth/elevation at
    the base-station panel, ``aoa`` the arrival azimuth at the UE array.
    """
    delays: np.ndarray
    powers: np.ndarray
    aod: np.ndarray
    eod: np.ndarray
    aoa: np.ndarray
    k_factor: float
    delay_spread: float
    speed: float
    carrier_hz: float = DOWNLINK_CARRIER_HZ
    label: str = ""

    @property
    def n_clusters(self) -> int:
        return len(self.delays)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def max_doppler(self) -> float:
        return self.speed / self.wavelength

    def rms_delay_spread(self) -> float:
        p = self.powers / self.powers.sum()
        mean = np.sum(p * self.delays)
        return float(np.sqrt(np.sum(p * (self.delays - mean) ** 2)))


def make_profile(kind: str, speed: float, delay_spread: float, seed: int,
                 carrier_hz: float = DOWNLINK_CARRIER_HZ) -> ChannelProfile:
    """Draw a cluster profile of the given kind.

    ``nlos_long_delay`` uses the same angular structure as ``nlos_rich`` but
    never scales its delays below the long (8000 ns) rms target.
    """
    if kind not in PRESETS:
        raise UnknownKind(f"unknown profile kind {kind!r}; expected one of {KINDS}")
    if speed < 0:
        raise ConfigError("speed must be non-negative", field="speed")
    if delay_spread <= 0:
        raise ConfigError("delay spread must be positive", field="delay_spread")
    k_factor, n_clusters, spread_deg = PRESETS[kind]
    if kind == "nlos_long_delay":
        delay_spread = max(delay_spread, LONG_DELAY_SPREAD)

    rng = np.random.default_rng(seed)
    spread = np.deg2rad(spread_deg)

    raw = np.sort(rng.exponential(1.0, n_clusters - 1))
    delays = np.concatenate([[0.0], raw])
    powers = np.exp(-delays) * 10 ** (-rng.normal(0.0, 3.0, n_clusters) / 10)
    if k_factor > 0:
        powers[1:] *= (1.0 / (k_factor + 1)) / powers[1:].sum()
        powers[0] = k_factor / (k_factor + 1)
    powers = powers / powers.sum()

    rms = np.sqrt(np.sum(powers * delays ** 2) - np.sum(powers * delays) ** 2)
    delays = delays * (delay_spread / rms)

    az0 = rng.uniform(-np.pi / 3, np.pi / 3)
    el0 = rng.uniform(-np.pi / 6, np.pi / 6)
    aoa0 = rng.uniform(-np.pi, np.pi)
    aod = az0 + rng.uniform(-spread, spread, n_clusters)
    eod = np.clip(el0 + rng.uniform(-spread, spread, n_clusters), -np.pi / 2, np.pi / 2)
    aoa = aoa0 + rng.uniform(-spread, spread, n_clusters)
    # the LoS ray sits at the cluster-set center
    aod[0], eod[0], aoa[0] = az0, el0, aoa0

    return ChannelProfile(delays=delays, powers=powers, aod=aod, eod=eod, aoa=aoa,
                          k_factor=k_factor, delay_spread=float(delay_spread), speed=float(speed),
                          carrier_hz=carrier_hz, label=kind)


@dataclass(frozen=True, eq=False)
class ClusterState:
    phase: np.ndarray          # initial phase per cluster
    motion_angle: np.ndarray   # angle between UE velocity and each ray
    xpol_phase: np.ndarray     # phase of the second polarization per cluster


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    per_rb: np.ndarray        # (n_rb, n_ue, n_ports)
    time_s: float
    profile_label: str
    panel: tuple[int, int]
    cluster_state: ClusterState | None

    @property
    def n_rb(self) -> int:
        return self.per_rb.shape[0]

    @property
    def n_ue(self) -> int:
        return self.per_rb.shape[1]

    @property
    def n_ports(self) -> int:
        return self.per_rb.shape[2]


def rb_frequencies(n_rb: int) -> np.ndarray:
    """Baseband RB-center frequencies, centered on 0."""
    return (np.arange(n_rb) - (n_rb - 1) / 2) * RB_BANDWIDTH_HZ


def panel_response(panel: tuple[int, int], azimuth, elevation) -> np.ndarray:
    """Unit-modulus response of an ``n1 x n2`` half-wavelength panel, shape ``(len(azimuth), n1*n2)``.

    Element ``(m, n)`` is at index ``m*n2 + n``, matching the beam grid.
    """
    n1, n2 = panel
    az, el = np.atleast_1d(azimuth), np.atleast_1d(elevation)
    u1 = 0.5 * np.cos(el) * np.sin(az)
    u2 = 0.5 * np.sin(el)
    m = np.repeat(np.arange(n1), n2)
    n = np.tile(np.arange(n2), n1)
    return np.exp(2j * np.pi * (np.outer(u1, m) + np.outer(u2, n)))


def ula_response(n_elements: int, azimuth) -> np.ndarray:
    az = np.atleast_1d(azimuth)
    return np.exp(1j * np.pi * np.outer(np.sin(az), np.arange(n_elements)))


def _as_panel(n_ports) -> tuple[int, int]:
    if isinstance(n_ports, (tuple, list)):
        n1, n2 = (int(v) for v in n_ports)
        return n1, n2
    if n_ports % 2:
        raise ConfigError("n_ports must be even (two polarizations)", field="n_ports")
    return n_ports // 2, 1


def draw_cluster_state(n_clusters: int, seed: int) -> ClusterState:
    rng = np.random.default_rng(seed)
    return ClusterState(phase=rng.uniform(0, 2 * np.pi, n_clusters),
                        motion_angle=rng.uniform(0, 2 * np.pi, n_clusters),
                        xpol_phase=rng.uniform(0, 2 * np.pi, n_clusters))


def _synthesize(profile: ChannelProfile, state: ClusterState, n_rb: int, n_ue: int,
                panel: tuple[int, int], time_s: float) -> np.ndarray:
    doppler = profile.max_doppler * np.cos(state.motion_angle)
    gain = np.sqrt(profile.powers) * np.exp(1j * (state.phase + 2 * np.pi * doppler * time_s))
    freq = np.exp(-2j * np.pi * np.outer(profile.delays, rb_frequencies(n_rb)))  # (C, n_rb)
    tx = panel_response(panel, profile.aod, profile.eod)                          # (C, n1*n2)
    tx = np.concatenate([tx, np.exp(1j * state.xpol_phase)[:, None] * tx], axis=1)
    rx = ula_response(n_ue, profile.aoa)                                          # (C, n_ue)
    coef = gain[:, None] * freq
    return np.einsum("cn,cu,cp->nup", coef, rx, tx.conj(), optimize=True)


def realize(profile: ChannelProfile, n_rb: int, n_ue_antennas: int, n_ports, time_s: float = 0.0,
            seed: int = 0) -> ChannelRealization:
    """Per-RB channel matrices at ``time_s``.

    ``n_ports`` is either the panel shape ``(n1, n2)`` or a port count, the
    latter meaning a horizontal ``(n_ports/2) x 1`` panel.
    """
    if n_rb < 1 or n_ue_antennas < 1:
        raise ConfigError("dimensions must be positive")
    panel = _as_panel(n_ports)
    state = draw_cluster_state(profile.n_clusters, seed)
    h = _synthesize(profile, state, n_rb, n_ue_antennas, panel, time_s)
    return ChannelRealization(per_rb=h, time_s=float(time_s), profile_label=profile.label,
                              panel=panel, cluster_state=state)


def evolve(realization: ChannelRealization, profile: ChannelProfile, dt: float) -> ChannelRealization:
    """Advance the realization by ``dt`` seconds, keeping cluster phases and directions."""
    if realization.cluster_state is None:
        raise MissingState("realization carries no cluster state")
    if dt < 0:
        raise ValueError("dt must be non-negative")
    t = realization.time_s + dt
    h = _synthesize(profile, realization.cluster_state, realization.n_rb, realization.n_ue,
                    realization.panel, t)
    return ChannelRealization(per_rb=h, time_s=t, profile_label=realization.profile_label,
                              panel=realization.panel, cluster_state=realization.cluster_state)


def from_matrices(per_rb, panel: tuple[int, int], label: str = "custom") -> ChannelRealization:
    """Wrap externally built per-RB matrices (no evolution state)."""
    per_rb = np.asarray(per_rb, dtype=complex)
    if per_rb.ndim == 2:
        per_rb = per_rb[None]
    return ChannelRealization(per_rb=per_rb, time_s=0.0, profile_label=label,
                              panel=tuple(panel), cluster_state=None)
