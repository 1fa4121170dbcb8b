#pragma once

#include "catres/errors.hpp"
#include "catres/hilbert.hpp"
#include "catres/model.hpp"
#include "catres/integrators.hpp"
#include "catres/dynamics.hpp"
#include "catres/analysis.hpp"
#include "catres/config.hpp"
#include "catres/experiments.hpp"
