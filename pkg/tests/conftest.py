import hypothesis

# CI boxes stall unpredictably under load; example counts stay the clock.
hypothesis.settings.register_profile(
    "suite", deadline=None, derandomize=True, print_blob=False
)
hypothesis.settings.load_profile("suite")
