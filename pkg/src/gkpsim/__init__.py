"""Simulator for a protected sqrt(T) gate on a grid-state qubit.

The package models a superconducting LC circuit shunted by a large
Josephson junction whose cosine potential carves a lattice of flux
wells.  A quartic correction engineered by an ancillary junction array
applies a sqrt(T) logical phase gate; dissipation through a cold charge
bath stabilizes the grid code while flux noise and parameter spread set
the error floor.  Modules are organized by role:

- quadratures: flux/charge grids and circuit Hamiltonians
- logical: grid-code observables, fidelities and frame bookkeeping
- circuit: lumped-element parameters, effective potentials, scales
- search: parameter-space optimization of the quartic strength
- dissipation: bath-calibrated jump operators and Lindblad reference
- fluxnoise: 1/f flux noise generation and segment integrals
- protocol: gate schedules and stochastic trajectory propagation
- harness: sweep experiments, aggregation, delimited output
"""

__version__ = "0.1.0"
