"""Streaming locomotion-mode and gait-phase estimation by circular kernel matching."""
