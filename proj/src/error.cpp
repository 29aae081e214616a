#include "vhdlx/error.hpp"

namespace vhdlx {

Error::Error(std::string name, const std::string& message)
    : std::runtime_error(name + ": " + message), name_(std::move(name)) {}

} // namespace vhdlx
