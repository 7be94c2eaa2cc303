#pragma once

#include <filesystem>
#include <string>

namespace testenv {

// Fresh directory under the build tree for one test case.
inline std::string scratch_dir(const std::string& name) {
    const std::filesystem::path p = std::filesystem::path("test_scratch") / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

} // namespace testenv
