#pragma once

#include <spdlog/spdlog.h>

namespace lfm {

// Reads LFM_INFLUENCE_LOG (trace|debug|info|warn|error|off) once and
// applies it to the default logger. Safe to call repeatedly.
void init_logging();

}  // namespace lfm
