"""Rule-augmented BiLSTM tagging for event extraction."""
__version__ = "0.1.0"
