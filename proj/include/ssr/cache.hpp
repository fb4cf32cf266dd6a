#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <string>

#include "ssr/client.hpp"

namespace ssr {

// Append-only directory of key-named response files. The key hashes the
// endpoint, the whitespace-normalized prompt and the attachment digest, so a
// rerun over identical inputs resolves every request locally. Files are
// written once and never rewritten; a second insert must carry the same
// response.
class ResponseCache {
  public:
    explicit ResponseCache(std::string dir);

    static std::string key_of(const std::string& endpoint, const std::string& prompt,
                              const std::string& attachment_digest);

    std::optional<std::string> lookup(const std::string& key) const;
    void insert(const std::string& key, const std::string& endpoint, const std::string& response);

    int hits() const;
    int misses() const;
    const std::string& dir() const { return dir_; }

  private:
    std::string path_of(const std::string& key) const;
    std::string dir_;
    mutable std::shared_mutex mu_;
    mutable std::atomic<int> hits_{0}, misses_{0};
};

// Cache-first client call. Responses failing `acceptable` are returned but
// never cached, so a retry genuinely re-asks instead of replaying the bad
// answer. A null cache degrades to a direct call. hit reports whether the
// response came from the cache.
std::string cached_call(ExternalClient& client, ResponseCache* cache, const ClientRequest& req,
                        const std::function<bool(const std::string&)>& acceptable = nullptr,
                        bool* hit = nullptr);

}  // namespace ssr
