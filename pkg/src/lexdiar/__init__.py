"""Speaker attribution of ASR words by joint acoustic and lexical beam search."""

__version__ = "0.1.0"
