"""Circuit framework: expressions, graphs, engine, transition library."""
