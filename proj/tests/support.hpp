#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include "ssr/common.hpp"

namespace ssr::test {

// scratch directory removed on scope exit
struct TmpDir {
    std::filesystem::path path;

    explicit TmpDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               strf("ssr_%s_%d_%d", tag.c_str(), int(getpid()), counter++);
        std::filesystem::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }
    std::string operator/(const std::string& sub) const { return (path / sub).string(); }
};

inline std::string slurp(const std::string& p) {
    auto bytes = std::filesystem::file_size(p);
    std::string out(bytes, '\0');
    FILE* f = fopen(p.c_str(), "rb");
    if (!f) fail_runtime("slurp: cannot open " + p);
    size_t got = fread(out.data(), 1, bytes, f);
    fclose(f);
    out.resize(got);
    return out;
}

}  // namespace ssr::test
