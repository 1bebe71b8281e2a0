#ifndef SPARSELQ_SPARSELQ_HPP
#define SPARSELQ_SPARSELQ_HPP

/**
 * @file
 * @brief Umbrella header of the sparselq library.
 */

#include "analysis.hpp"
#include "cli.hpp"
#include "cones.hpp"
#include "errors.hpp"
#include "inner.hpp"
#include "io.hpp"
#include "l0.hpp"
#include "log.hpp"
#include "model.hpp"
#include "outer.hpp"
#include "penalties.hpp"
#include "vectorize.hpp"

#endif  // SPARSELQ_SPARSELQ_HPP
