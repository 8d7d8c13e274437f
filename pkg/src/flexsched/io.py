"""Instance JSON interchange and EV session CSV ingestion."""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError, WindowError
from .model import CostKind, CostModel, Instance, Job, ShapeKind


def cost_to_dict(cost: CostModel, lipschitz: float) -> dict:
    params = {}
    if cost.kind is CostKind.LINEAR:
        params["slope"] = cost.slope.tolist()
    elif cost.kind is CostKind.PIECEWISE_LINEAR:
        params["slopes"] = cost.pieces.slopes.tolist()
        params["intercepts"] = cost.pieces.intercepts.tolist()
    elif cost.kind is CostKind.EXPECTED_SHORTFALL:
        params["renewable_model"] = cost.shortfall.to_dict()
    return {"kind": cost.kind.value, "params": params, "lipschitz": lipschitz}


def cost_from_dict(d: dict) -> CostModel:
    kind = CostKind(d["kind"])
    params = d.get("params") or {}
    lip = d.get("lipschitz")
    if kind is CostKind.QUADRATIC_TRACKING:
        return CostModel.quadratic_tracking(params.get("target"), lipschitz=lip)
    if kind is CostKind.QUADRATIC_PURE:
        return CostModel.quadratic_pure(lipschitz=lip)
    if kind is CostKind.LINEAR:
        return CostModel.linear(params["slope"], lipschitz=lip)
    if kind is CostKind.PIECEWISE_LINEAR:
        return CostModel.piecewise_linear(params["slopes"], params["intercepts"], lipschitz=lip)
    from .stochastic import RenewableModel

    return CostModel.expected_shortfall(RenewableModel.from_dict(params["renewable_model"]),
                                        lipschitz=lip)


def instance_to_dict(instance: Instance) -> dict:
    # the computed lipschitz constant is written out so readers need not rederive it
    out = {
        "horizon": instance.horizon,
        "cost": cost_to_dict(instance.cost, instance.lipschitz),
        "renewable": None if instance.renewable is None else instance.renewable.tolist(),
        "jobs": [
            {
                "id": job.id,
                "arrival": job.arrival,
                "deadline": job.deadline,
                "duration": job.duration,
                "shape": job.shape.tolist(),
                "kind": job.kind.value,
            }
            for job in instance.jobs
        ],
    }
    if instance.cost.kind is CostKind.EXPECTED_SHORTFALL:
        out["stochastic"] = {"renewable_model": instance.cost.shortfall.to_dict()}
    return out


def instance_from_dict(d: dict) -> Instance:
    T = int(d["horizon"])
    jobs = []
    for k, jd in enumerate(d.get("jobs", [])):
        shape = np.asarray(jd["shape"], dtype=float)
        if "duration" in jd and int(jd["duration"]) != shape.size:
            if shape.size == 1:
                shape = np.full(int(jd["duration"]), shape[0])
            else:
                raise ParseError(f"job {jd.get('id', k)}: duration does not match shape length")
        jobs.append(Job(int(jd.get("id", k)), shape, jd["arrival"], jd["deadline"], jd.get("kind")))
    cost_d = d.get("cost") or {"kind": "quadratic_pure"}
    if cost_d.get("kind") == CostKind.EXPECTED_SHORTFALL.value and "renewable_model" not in (
        cost_d.get("params") or {}
    ):
        cost_d = dict(cost_d, params={"renewable_model": d["stochastic"]["renewable_model"]})
    renewable = d.get("renewable")
    return Instance(T, jobs, cost_from_dict(cost_d), None if renewable is None else renewable)


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1))


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


# session CSV ---------------------------------------------------------------

REQUIRED_COLUMNS = ("arrival", "departure", "completion", "energy_kwh")


def _parse_ts(text: str, line: int, column: str) -> datetime:
    try:
        return datetime.fromisoformat(text.strip())
    except (ValueError, AttributeError) as exc:
        raise ParseError(f"bad {column} timestamp {text!r}", line) from exc


def load_sessions_csv(path, T: int = 24, slot_hours: float = 1.0,
                      origin: Optional[datetime] = None, shape: str = "auto",
                      cost: Optional[CostModel] = None,
                      skipped: Optional[list] = None) -> Instance:
    """Build an instance from charging sessions.

    Columns: ``arrival``, ``departure``, ``completion`` (ISO timestamps),
    ``energy_kwh`` and optionally ``currents`` (``;``-separated per-slot
    current samples from the arrival slot on). Slot ``k`` covers
    ``[origin + (k-1) h, origin + k h)``; ``origin`` defaults to midnight of the
    earliest arrival.

    The arrival slot is the slot containing the plug-in time, the deadline
    the last slot overlapping the plugged-in interval, and the duration is
    the plug-in-to-completion time rounded up to whole slots. With
    ``shape="auto"`` a session with currents becomes a realistic job whose
    shape follows the currents scaled to the session energy; otherwise the
    job is rectangular at the average power.

    Rows whose window cannot hold the duration are skipped; a ``WindowError``
    for each is appended to ``skipped`` when given.
    """
    h = timedelta(hours=slot_hours)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return Instance(T, [], cost or CostModel.quadratic_pure())
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ParseError(f"missing columns {missing}", 1)
        for row in reader:
            line = reader.line_num
            arr = _parse_ts(row["arrival"], line, "arrival")
            dep = _parse_ts(row["departure"], line, "departure")
            comp = _parse_ts(row["completion"], line, "completion")
            try:
                energy = float(row["energy_kwh"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad energy {row['energy_kwh']!r}", line) from exc
            if not (arr <= comp <= dep) or energy < 0 or not math.isfinite(energy):
                raise ParseError("need arrival <= completion <= departure and energy >= 0", line)
            currents = None
            raw = (row.get("currents") or "").strip()
            if raw:
                try:
                    currents = np.array([float(x) for x in raw.split(";")])
                except ValueError as exc:
                    raise ParseError(f"bad currents {raw!r}", line) from exc
            rows.append((line, arr, dep, comp, energy, currents))

    if origin is None and rows:
        first = min(r[1] for r in rows)
        origin = first.replace(hour=0, minute=0, second=0, microsecond=0)

    jobs = []
    for line, arr, dep, comp, energy, currents in rows:
        a = int((arr - origin) // h) + 1
        dline = math.ceil((dep - origin) / h)
        d = max(1, math.ceil((comp - arr) / h - 1e-9))
        if a < 1 or dline > T or a + d - 1 > dline:
            if skipped is not None:
                skipped.append(WindowError(
                    f"window [{a}, {dline}] cannot hold {d} slots within T={T}", line))
            continue
        use_real = shape == ShapeKind.REALISTIC.value or (shape == "auto" and currents is not None)
        if use_real and currents is not None:
            prof = np.zeros(d)
            n = min(d, currents.size)
            prof[:n] = np.maximum(currents[:n], 0.0)
            if prof.sum() <= 0:
                prof[:] = 1.0
            job = Job(len(jobs), prof * (energy / prof.sum()), a, dline, ShapeKind.REALISTIC)
        else:
            job = Job.rectangular(len(jobs), energy / (d * slot_hours), d, a, dline)
        jobs.append(job)
    return Instance(T, jobs, cost or CostModel.quadratic_pure())
