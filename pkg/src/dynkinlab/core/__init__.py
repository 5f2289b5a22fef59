"""SDE models, obstacle problems and the grid solver."""
