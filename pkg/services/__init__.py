"""Services: Gamma model, stochastic-distance tests, filters, phantom, metrics and exports."""
