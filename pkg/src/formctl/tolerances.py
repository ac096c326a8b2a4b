"""Default numerical thresholds shared by the geometry and control code."""

TOL_RANK = 1e-8        # relative singular-value floor
TOL_WII = 1e-9         # |w_ii| / |h_ii| below this means not localizable
TOL_COINCIDE = 1e-9    # positions closer than this coincide
TOL_PSD_REL = 1e-8     # MDS negative-eigenvalue floor, relative to trace(X)/(d+2)
TOL_ANGLE = 1e-6       # rad
TOL_BEARING = 1e-8
TOL_UNIT = 1e-9
