#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssr {

// Validation failures (bad preconditions, malformed inputs) exit with code 1,
// everything else that throws exits with code 2. Keep the two distinguishable.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail_validation(const std::string& msg) { throw ValidationError(msg); }
[[noreturn]] inline void fail_runtime(const std::string& msg) { throw std::runtime_error(msg); }

inline std::string strf(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    char buf[1024];
    vsnprintf(buf, sizeof(buf), fmt, ap);
    va_end(ap);
    return std::string(buf);
}

inline std::string lowercase(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = char(c - 'A' + 'a');
    return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Collapse runs of whitespace to single spaces and trim the ends. Used both for
// prompt canonicalization (cache keys) and for lenient string compares.
inline std::string normalize_ws(const std::string& s) {
    std::string out;
    for (const auto& w : split_ws(s)) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Deterministic RNG wrapper. The distributions in <random> are implementation
// defined, so every draw here is built from raw mt19937 output to keep runs
// reproducible independent of the standard library.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(uint32_t(seed ^ (seed >> 32))) {}

    uint32_t raw() { return eng_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        uint64_t hi = eng_() >> 5, lo = eng_() >> 6;
        return (hi * 67108864.0 + lo) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int below(int n) {
        if (n <= 0) fail_runtime("Rng::below needs n > 0");
        return int(uint64_t(eng_()) * uint64_t(n) >> 32);
    }

    // standard normal via Box-Muller
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-12) u1 = 1e-12;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (int i = int(v.size()) - 1; i > 0; --i) std::swap(v[size_t(i)], v[size_t(below(i + 1))]);
    }

    std::string state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }
    void restore(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (!is) fail_runtime("bad rng state string");
    }

private:
    std::mt19937 eng_;
};

// Stable seed mixing for derived streams (per split, per sample, ...).
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t x = a * 0x9e3779b97f4a7c15ULL + b + 0x7f4a7c15ULL;
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

inline uint64_t mix_seed(uint64_t a, const std::string& tag) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return mix_seed(a, h);
}

}  // namespace ssr
