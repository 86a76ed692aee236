"""Scenario-driven verification front end."""
from .report import Report, catalog_list, export, run
from .scenario import Scenario, ScenarioError, parse_scenario

__all__ = ["Report", "Scenario", "ScenarioError", "catalog_list", "export", "parse_scenario",
           "run"]
