#include "retouch/common/rng.hpp"

#include <sstream>

#include "retouch/common/error.hpp"

namespace retouch {

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& text) {
  std::istringstream is(text);
  is >> engine_;
  if (is.fail()) throw InvalidArgument("malformed rng state");
}

}  // namespace retouch
