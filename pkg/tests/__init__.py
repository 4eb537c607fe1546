# Tests package for Satellite Imagery API
