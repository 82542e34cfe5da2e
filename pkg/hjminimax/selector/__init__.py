# Minimax selector and its property checks
