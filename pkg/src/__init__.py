"""Mixed-size global placement: spectral initialization, area-hint refinement,
scheduled macro densities and electrostatic global placement."""
