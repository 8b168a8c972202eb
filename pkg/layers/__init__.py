# Layered Zone-Graph scene engine
