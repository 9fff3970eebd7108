"""Report and model snapshot exporters"""
