import hypothesis

hypothesis.settings.register_profile(
    "suite",
    max_examples=50,
    derandomize=True,
    deadline=None,
)
hypothesis.settings.load_profile("suite")
