"""
Dubins Escape Test Suite

Unit, property and acceptance tests for the escape solvers and CLI.
"""
