#pragma once

#include "czo/core.hpp"
#include "czo/kernels.hpp"
#include "czo/lab.hpp"
#include "czo/lipschitz_dual.hpp"
#include "czo/measure_io.hpp"
#include "czo/measures.hpp"
#include "czo/scales.hpp"
#include "czo/symmetry.hpp"
#include "czo/transforms.hpp"
