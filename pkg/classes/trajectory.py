import json
import os
from dataclasses import dataclass
from typing import ClassVar, List

import numpy as np
import pandas as pd

from classes.fourier_field import FourierField


@dataclass
class Trajectory:
    """
    Time-indexed sequence of FourierFields, the approximation phi.

    Between stored nodes phi is linear in time, coefficient by coefficient.

    Attributes
    ----------
        times (np.ndarray): increasing node times t_0 < t_1 < ...
        states (list[FourierField]): one field per node, all with the same n_modes
        dt (float): the solver step h
        record_every (int): number of solver steps between stored nodes

    Methods
    -------
    at(t)
        linear interpolation between the neighbouring nodes
    save(directory)
        writes trajectory.json (header) and trajectory.csv (t, Re/Im interleaved)
    load(directory)
        reads a trajectory written by save
    """

    times: np.ndarray
    states: List[FourierField]
    dt: float
    record_every: int = 1

    HEADER_NAME: ClassVar[str] = "trajectory.json"
    TABLE_NAME: ClassVar[str] = "trajectory.csv"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size != len(self.states):
            raise ValueError(f"{self.times.size} times for {len(self.states)} states")
        if self.states and len({s.n_modes for s in self.states}) != 1:
            raise ValueError("All trajectory states must share n_modes")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def n_modes(self) -> int:
        return self.states[0].n_modes

    def at(self, t: float) -> FourierField:
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t = {t} outside [{self.times[0]}, {self.times[-1]}]")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        if j >= len(self.states) - 1:
            return self.states[-1]
        theta = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        return self.states[j].lerp(self.states[j + 1], theta)

    def save(self, directory: str) -> str:
        os.makedirs(directory, exist_ok=True)
        header = {"n_modes": self.n_modes, "dt": self.dt, "record_every": self.record_every,
                  "nodes": len(self)}
        with open(os.path.join(directory, self.HEADER_NAME), "w", encoding="utf-8") as f:
            json.dump(header, f, indent=2)

        coeffs = np.array([s.coeffs for s in self.states])
        columns = {"t": self.times}
        for k in range(self.n_modes):
            columns[f"re_{k + 1}"] = coeffs[:, k].real
            columns[f"im_{k + 1}"] = coeffs[:, k].imag
        table_path = os.path.join(directory, self.TABLE_NAME)
        pd.DataFrame(columns).to_csv(table_path, index=False, float_format="%.17g")
        return table_path

    @classmethod
    def load(cls, directory: str) -> "Trajectory":
        with open(os.path.join(directory, cls.HEADER_NAME), "r", encoding="utf-8") as f:
            header = json.load(f)
        df = pd.read_csv(os.path.join(directory, cls.TABLE_NAME), float_precision="round_trip")
        n = int(header["n_modes"])
        re = df[[f"re_{k}" for k in range(1, n + 1)]].to_numpy()
        im = df[[f"im_{k}" for k in range(1, n + 1)]].to_numpy()
        states = [FourierField(row) for row in re + 1j * im]
        return cls(df["t"].to_numpy(), states, float(header["dt"]), int(header["record_every"]))
