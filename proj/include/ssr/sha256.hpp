#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <string>
#include <vector>

#include "ssr/common.hpp"

namespace ssr {

// hex SHA-256 digest; used for cache keys, attachment digests and parameter
// fingerprints (frozen-model contracts)
inline std::string sha256_hex(const void* data, size_t len) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int md_len = 0;
    if (1 != EVP_Digest(data, len, md, &md_len, EVP_sha256(), nullptr))
        fail_runtime("EVP_Digest failed");
    static const char* hexd = "0123456789abcdef";
    std::string out;
    out.reserve(md_len * 2);
    for (unsigned int i = 0; i < md_len; ++i) {
        out.push_back(hexd[md[i] >> 4]);
        out.push_back(hexd[md[i] & 0xf]);
    }
    return out;
}

inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

inline std::string sha256_hex(const std::vector<uint8_t>& v) {
    return sha256_hex(v.data(), v.size());
}

}  // namespace ssr
