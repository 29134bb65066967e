#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "attrsel/log.hpp"

int main(int argc, char** argv) {
  attrsel::set_log_sink(nullptr);
  return doctest::Context(argc, argv).run();
}
