"""Multi-directional geodesic convolution on triangle meshes."""
