# Experiment runner
