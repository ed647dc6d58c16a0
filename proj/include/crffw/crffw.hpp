#pragma once

#include "crffw/types.hpp"
#include "crffw/random.hpp"
#include "crffw/model.hpp"
#include "crffw/regularizer.hpp"
#include "crffw/simplex.hpp"
#include "crffw/schedule.hpp"
#include "crffw/bounds.hpp"
#include "crffw/solvers.hpp"
#include "crffw/diagnostics.hpp"
#include "crffw/instances.hpp"
