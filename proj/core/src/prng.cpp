#include "ordsurf/prng.hpp"

#include <cmath>

namespace ordsurf {

double SplitMix64::normal() {
  // Box-Muller, consuming exactly two draws per call so the stream position
  // after a call never depends on the values produced. uniform() lies in
  // [0,1), so 1-u lies in (0,1] and the log is always finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace ordsurf
