# Scenario builders, loader and engine
