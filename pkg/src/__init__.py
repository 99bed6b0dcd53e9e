"""ecstream - distributed online learning of Event Calculus definitions."""
