"""
Core data structures shared by every yieldcast package.

Modules:
- models: Immutable records, weather series and the joined dataset
- constants: Weather variables, season geometry, training defaults
- errors: Exception hierarchy
- persistence: msgpack artifacts and atomic writes
- config: Run configuration loading and validation
"""
