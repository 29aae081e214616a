#pragma once

#include "vhdlx/error.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace vhdlx::testing {

// Name of the vhdlx::Error raised by f, or "<none>".
template <class F>
std::string error_name(F&& f) {
    try {
        f();
    } catch (const vhdlx::Error& e) {
        return e.name();
    }
    return "<none>";
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("vhdlx-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

} // namespace vhdlx::testing
