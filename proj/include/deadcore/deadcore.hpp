#pragma once

#include "deadcore/analysis.hpp"
#include "deadcore/components.hpp"
#include "deadcore/config.hpp"
#include "deadcore/eigen.hpp"
#include "deadcore/energy.hpp"
#include "deadcore/extensions.hpp"
#include "deadcore/field_io.hpp"
#include "deadcore/grid.hpp"
#include "deadcore/minimize.hpp"
#include "deadcore/solve.hpp"
#include "deadcore/weight.hpp"
