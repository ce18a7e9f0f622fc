#pragma once

// Umbrella header for the library (the CLI headers live under divspline/cli/).

#include "divspline/bspline.hpp"
#include "divspline/cases.hpp"
#include "divspline/dual.hpp"
#include "divspline/errors.hpp"
#include "divspline/forms.hpp"
#include "divspline/mesh.hpp"
#include "divspline/solver.hpp"
#include "divspline/space.hpp"
