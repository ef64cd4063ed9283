"""QAP engine: instances, sequential environment, pointer policy, A2C training and baselines."""
