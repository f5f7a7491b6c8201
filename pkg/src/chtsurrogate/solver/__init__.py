"""Synthetic cold-plate data: pin layouts, heat flux, flow and temperature solvers."""

from .datagen import datagen, load_flow, load_sample, resolve_flux, sample_ids, solve_sample
from .domain import DomainSpec, SolverGrid
from .flow import SolveResult, fluid_mask, solve_flow, transverse_fluxes
from .flux import FluxField, accumulated_heat, gen_flux
from .layouts import LayoutConstraints, PinLayout, latin_hypercube, sample_layouts
from .thermal import outlet_bulk_temperature, solve_temperature
