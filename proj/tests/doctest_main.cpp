#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "lfm/log.hpp"

int main(int argc, char** argv) {
  lfm::init_logging();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
