#pragma once

#include "eet/config.hpp"
#include "eet/dynamics.hpp"
#include "eet/entanglement.hpp"
#include "eet/errors.hpp"
#include "eet/generator.hpp"
#include "eet/io.hpp"
#include "eet/linalg.hpp"
#include "eet/model.hpp"
#include "eet/quantum_core.hpp"
#include "eet/scenarios.hpp"
#include "eet/units.hpp"
