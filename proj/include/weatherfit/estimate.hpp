#pragma once

#include "weatherfit/estimate/cma.hpp"
#include "weatherfit/estimate/descent.hpp"
#include "weatherfit/estimate/joint.hpp"
#include "weatherfit/estimate/objective.hpp"
