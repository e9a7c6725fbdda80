#include "skillforge/version.hpp"

namespace skf {

const char* version() { return "0.1.0"; }

}  // namespace skf
