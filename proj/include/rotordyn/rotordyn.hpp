#pragma once

#include "rotordyn/blas_runtime.hpp"
#include "rotordyn/config.hpp"
#include "rotordyn/core_state.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/floquet.hpp"
#include "rotordyn/level_statistics.hpp"
#include "rotordyn/lyapunov.hpp"
#include "rotordyn/many_body.hpp"
#include "rotordyn/observables.hpp"
#include "rotordyn/propagator.hpp"
#include "rotordyn/rng.hpp"
#include "rotordyn/series_io.hpp"
#include "rotordyn/version.hpp"
