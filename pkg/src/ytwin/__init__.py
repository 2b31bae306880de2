"""YTwin - digital twin of a microblogging platform driven by LLM agents."""

__version__ = "0.1.0"
