# Register the graph fixtures when running from a source checkout
pytest_plugins = ["confdimlab.fixtures"]
