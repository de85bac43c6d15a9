# Analogue-digital mode simulator
