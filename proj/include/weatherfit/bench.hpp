#pragma once

#include "weatherfit/bench/cases.hpp"
#include "weatherfit/bench/corpus.hpp"
#include "weatherfit/bench/landscape.hpp"
#include "weatherfit/bench/recovery.hpp"
#include "weatherfit/bench/suite.hpp"
