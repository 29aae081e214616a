#pragma once

#include <stdexcept>
#include <string>

namespace vhdlx {

// Domain error carrying a stable name (e.g. "MissingConverter", "DanglingMerge").
// The CLI prints the name and maps any Error to exit code 1.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& message);

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

} // namespace vhdlx
