#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "abkb/log.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(ABKB_DATA_DIR) + "/" + name; }

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("abkb-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// Collects warnings for the lifetime of the object.
struct WarningCapture {
    std::vector<std::string> messages;
    abkb::WarningSink previous;
    WarningCapture() {
        previous = abkb::set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
    }
    ~WarningCapture() { abkb::set_warning_sink(previous); }
};

}  // namespace testing
