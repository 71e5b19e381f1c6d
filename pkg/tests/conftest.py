"""Shared pytest configuration: a calm hypothesis profile.

Property tests here explore combinatorial structure, not performance, so
the per-example deadline is disabled (schedule builds can be slow on the
odd large draw) and the example budget is kept moderate.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "coopcache",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("coopcache")
