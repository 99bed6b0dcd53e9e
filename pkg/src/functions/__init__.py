"""Pure functions: Event Calculus inference, clause search, scoring, codecs and file I/O."""
