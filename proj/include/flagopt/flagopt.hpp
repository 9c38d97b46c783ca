#pragma once

#include "flagopt/signature.hpp"
#include "flagopt/coords.hpp"
#include "flagopt/tangent.hpp"
#include "flagopt/expm.hpp"
#include "flagopt/geometry.hpp"
#include "flagopt/calculus.hpp"
#include "flagopt/objectives.hpp"
#include "flagopt/solvers.hpp"
