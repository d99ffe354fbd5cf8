// Standalone acceptance binary: runs the eleven release checks and exits
// nonzero when any of them fails.
#include <iostream>

#include "mfj/acceptance.hpp"

int main() {
  const int failures = mfj::run_acceptance(std::cout);
  return failures == 0 ? 0 : 1;
}
