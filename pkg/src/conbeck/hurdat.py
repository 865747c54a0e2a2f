"""HURDAT2 hurricane-track ingestion and track-to-field conversion.

The parser follows the NOAA HURDAT2 layout: header lines of the form
``AL092011, IRENE, 39,`` followed by that many data rows (``date, time,
record id, status, lat, lon, ...``).  Malformed input never raises; bad
rows and count mismatches are returned as line-numbered diagnostics next
to whatever parsed cleanly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError
from .manifold import project_to_tangent, sphere_point

__all__ = ["StormTrack", "hurdat2_parse", "track_to_field"]

_HEADER_RE = re.compile(r"^[A-Z]{2}\d{6}$")
_COORD_RE = re.compile(r"^(\d+(?:\.\d+)?)([NSEW])$")


@dataclass(frozen=True)
class StormTrack:
    """One storm: identifier, name, and the time-ordered track samples."""

    id: str
    name: str
    times: tuple = field(default_factory=tuple)
    lats: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lons: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.times)

    @property
    def samples(self):
        """Ordered ``(timestamp, latitude, longitude)`` tuples."""
        return list(zip(self.times, self.lats.tolist(), self.lons.tolist()))


def _parse_coord(token, kind):
    """``"28.0N"`` -> +28.0, ``"94.8W"`` -> -94.8; None if unparseable."""
    match = _COORD_RE.match(token.strip())
    if not match:
        return None
    value = float(match.group(1))
    hemi = match.group(2)
    if kind == "lat":
        if hemi == "N":
            signed = value
        elif hemi == "S":
            signed = -value
        else:
            return None
        if not -90.0 <= signed <= 90.0:
            return None
        return signed
    if hemi == "E":
        signed = value
    elif hemi == "W":
        signed = -value
    else:
        return None
    # wrap dateline-crossing longitudes into (-180, 180]
    signed = (signed + 180.0) % 360.0 - 180.0
    if signed == -180.0:
        signed = 180.0
    return signed


def _parse_row(parts):
    """Parse one data row into (datetime, lat, lon); raise ValueError if bad."""
    if len(parts) < 6:
        raise ValueError(f"expected at least 6 fields, got {len(parts)}")
    when = datetime.strptime(parts[0].strip() + parts[1].strip(), "%Y%m%d%H%M")
    lat = _parse_coord(parts[4], "lat")
    if lat is None:
        raise ValueError(f"bad latitude {parts[4].strip()!r}")
    lon = _parse_coord(parts[5], "lon")
    if lon is None:
        raise ValueError(f"bad longitude {parts[5].strip()!r}")
    return when, lat, lon


def hurdat2_parse(text):
    """Parse HURDAT2 text into storm tracks.

    Returns ``(tracks, issues)`` where ``issues`` is a list of line-numbered
    diagnostic strings.  Rows with unparseable fields or non-increasing
    timestamps are dropped (with a diagnostic); a header whose declared row
    count does not match the rows that follow is reported by its line
    number.  Empty input yields ``([], [])``.
    """
    tracks = []
    issues = []

    current = None  # (id, name, header_lineno, declared, times, lats, lons)

    def close(found):
        if current is None:
            return
        storm_id, name, header_lineno, declared, times, lats, lons = current
        if found != declared:
            issues.append(
                f"line {header_lineno}: header {storm_id} declares {declared} "
                f"rows, found {found}"
            )
        tracks.append(
            StormTrack(
                id=storm_id,
                name=name,
                times=tuple(times),
                lats=np.array(lats, dtype=float),
                lons=np.array(lons, dtype=float),
            )
        )

    remaining = 0
    found = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        first = parts[0].strip()
        if _HEADER_RE.match(first):
            close(found)
            current = None
            if len(parts) < 3:
                issues.append(f"line {lineno}: header {first} is missing fields")
                remaining = 0
                found = 0
                continue
            try:
                declared = int(parts[2].strip())
            except ValueError:
                issues.append(
                    f"line {lineno}: header {first} has a non-integer row count "
                    f"{parts[2].strip()!r}"
                )
                declared = 0
            current = (first, parts[1].strip(), lineno, declared, [], [], [])
            remaining = declared
            found = 0
            continue
        if current is None:
            issues.append(f"line {lineno}: data row outside any storm block")
            continue
        if remaining <= 0:
            issues.append(
                f"line {lineno}: data row beyond the declared count for "
                f"header {current[0]}"
            )
            continue
        remaining -= 1
        found += 1
        try:
            when, lat, lon = _parse_row(parts)
        except ValueError as exc:
            issues.append(f"line {lineno}: row dropped ({exc})")
            continue
        times = current[4]
        if times and when <= times[-1]:
            issues.append(
                f"line {lineno}: row dropped (timestamp {when:%Y%m%d %H%M} "
                f"not increasing)"
            )
            continue
        times.append(when)
        current[5].append(lat)
        current[6].append(lon)
    close(found)
    return tracks, issues


def track_to_field(track, frames, cloud, normalize_before_average=True):
    """Convert a storm track to a tangent vector field on a sphere mesh.

    Track positions map to the unit sphere, forward differences
    ``y_{k+1} - y_k`` give displacement vectors (zero displacements are
    dropped), each vector is snapped to the mesh node nearest its base
    point, vectors landing on one node are averaged, and the result is
    projected to tangent coordinates through the node frames.

    With ``normalize_before_average`` each displacement is scaled to unit
    length before averaging (the default); otherwise raw displacements are
    averaged first and the per-node mean is normalized.
    """
    if len(track) < 2:
        raise FormatError(
            f"track {track.id} has {len(track)} samples; at least 2 are required"
        )
    cloud = np.asarray(cloud, dtype=float)
    frames = np.asarray(frames, dtype=float)
    n = cloud.shape[0]
    theta = np.deg2rad(track.lats)
    psi = -np.deg2rad(track.lons)  # stored east-positive; psi is west-positive
    points = sphere_point(theta, psi)
    diffs = points[1:] - points[:-1]
    norms = np.linalg.norm(diffs, axis=1)
    keep = norms > 1e-12
    diffs = diffs[keep]
    bases = points[:-1][keep]
    sums = np.zeros((n, cloud.shape[1]))
    counts = np.zeros(n)
    if diffs.shape[0]:
        if normalize_before_average:
            diffs = diffs / norms[keep, None]
        nearest = cKDTree(cloud).query(bases)[1]
        np.add.at(sums, nearest, diffs)
        np.add.at(counts, nearest, 1.0)
    hit = counts > 0
    means = np.zeros_like(sums)
    means[hit] = sums[hit] / counts[hit, None]
    if not normalize_before_average:
        lengths = np.linalg.norm(means, axis=1)
        nz = lengths > 1e-12
        means[nz] = means[nz] / lengths[nz, None]
    return project_to_tangent(frames, means)
