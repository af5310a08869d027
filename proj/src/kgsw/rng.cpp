#include "kgsw/rng.hpp"

#include <sstream>

#include "kgsw/error.hpp"

namespace kgsw {

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& state) {
  std::istringstream is(state);
  Rng rng;
  is >> rng;
  if (is.fail()) throw Error(ErrorKind::parse, "malformed RNG state");
  return rng;
}

}  // namespace kgsw
