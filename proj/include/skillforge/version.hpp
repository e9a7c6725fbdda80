#pragma once

namespace skf {

const char* version();

}  // namespace skf
