# Generating functions and generating families
