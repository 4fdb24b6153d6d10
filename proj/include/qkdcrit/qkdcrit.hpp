#pragma once

// Umbrella header: the whole toolkit in dependency order.

#include "errors.hpp"          // IWYU pragma: export
#include "log_value.hpp"       // IWYU pragma: export
#include "rng.hpp"             // IWYU pragma: export
#include "parallel.hpp"        // IWYU pragma: export
#include "complex_matrix.hpp"  // IWYU pragma: export
#include "hermitian_eig.hpp"   // IWYU pragma: export
#include "matrix_functions.hpp" // IWYU pragma: export
#include "density_operator.hpp" // IWYU pragma: export
#include "cq_state.hpp"        // IWYU pragma: export
#include "security_criteria.hpp" // IWYU pragma: export
#include "key_rate.hpp"        // IWYU pragma: export
#include "toeplitz.hpp"        // IWYU pragma: export
#include "protocol_sim.hpp"    // IWYU pragma: export
#include "verify_suites.hpp"   // IWYU pragma: export
#include "audit.hpp"           // IWYU pragma: export
