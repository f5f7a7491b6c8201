"""Model-ready arrays for one role from an on-disk dataset."""

import numpy as np

from ..datapipe.dataset import load_dataset, stack
from ..datapipe.scalers import apply_scaler, invert_scaler
from ..nn.model import VelocityAdapter

ROLE_FIELD = {"pressure": "p", "velocity": "vel", "temperature": "T"}


class FieldData:
    """Scaled inputs and targets per split; temperature inputs carry a velocity channel."""

    def __init__(self, dataset, role):
        if role not in ROLE_FIELD:
            raise ValueError(f"unknown role {role!r}")
        self.manifest, self.arrays = load_dataset(dataset) if not isinstance(dataset, tuple) else dataset
        self.role, self.field = role, ROLE_FIELD[role]
        if self.field not in self.arrays or "geometry" not in self.arrays:
            raise ValueError(f"dataset lacks the geometry or {self.field} field")
        self.scaler = self.manifest.scalers[self.field]
        self.vel_input_scaler = self.manifest.input_scalers.get("vel")
        if role == "temperature" and self.vel_input_scaler is None:
            raise ValueError("temperature training needs the velocity input scaler in the manifest")

    @property
    def resolution(self):
        return tuple(self.manifest.resolution)

    @property
    def solid_value(self):
        """Scaled value of a physical zero; pins masked pixels of flow fields."""
        return 0.0 if self.role == "temperature" else float(apply_scaler(0.0, self.scaler))

    def ids(self, split):
        return self.manifest.ids(split)

    def geometry(self, split):
        return stack(self.arrays["geometry"], self.ids(split))[:, None]

    def true_velocity_input(self, split):
        return apply_scaler(stack(self.arrays["vel"], self.ids(split)), self.vel_input_scaler)[:, None]

    def inputs(self, split, velocity_model=None, adapter=None):
        """(N, C, n_y, n_x) float32 network inputs.

        Temperature inputs use the true velocity (teacher forcing) unless a frozen
        ``velocity_model`` is given, whose predictions are mapped by ``adapter``.
        """
        g = self.geometry(split)
        if self.role != "temperature":
            return g
        if velocity_model is None:
            v = self.true_velocity_input(split)
        else:
            v = velocity_model.predict(g)
            adapter = adapter or self.velocity_adapter()
            v = adapter(v)
        return np.concatenate([g, v], axis=1).astype(np.float32)

    def targets(self, split, scaled=True):
        y = stack(self.arrays[self.field], self.ids(split))[:, None]
        return apply_scaler(y, self.scaler).astype(np.float32) if scaled else y

    def to_physical(self, pred, geometry=None):
        y = invert_scaler(np.asarray(pred, dtype=np.float64), self.scaler)
        if geometry is not None and self.role != "temperature":
            y = np.where(np.asarray(geometry) >= 1.0, 0.0, y)
        return y

    def velocity_adapter(self, velocity_scaler=None):
        """Affine map from standardized velocity output to the min-max velocity input."""
        vs = velocity_scaler or self.manifest.scalers["vel"]
        # physical = z / gain_v + a_v ; input = physical * gain_in + offset_in
        gain = self.vel_input_scaler.gain / vs.gain
        offset = self.vel_input_scaler.gain * float(invert_scaler(0.0, vs)) + self.vel_input_scaler.offset
        return VelocityAdapter(float(gain), float(offset))
