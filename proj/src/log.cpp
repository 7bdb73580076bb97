#include "lfm/log.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace lfm {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    // stdout is reserved for command output.
    spdlog::set_default_logger(spdlog::stderr_color_mt("lfm"));
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("LFM_INFLUENCE_LOG")) {
      spdlog::set_level(spdlog::level::from_str(env));
    }
  });
}

}  // namespace lfm
