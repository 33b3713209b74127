#include "mwlab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mwlab {

unsigned thread_count() {
  if (const char* env = std::getenv("LAB_THREADS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

}  // namespace mwlab
