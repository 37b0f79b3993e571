#include "funrl/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace funrl {

std::string Rng::save() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::load(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw std::invalid_argument("malformed rng state");
}

}  // namespace funrl
