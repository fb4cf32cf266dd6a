#include "ssr/cache.hpp"

#include <chrono>
#include <filesystem>

#include "json.hpp"
#include "ssr/image_io.hpp"
#include "ssr/sha256.hpp"

namespace ssr {

namespace fs = std::filesystem;
using nlohmann::json;

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
    if (dir_.empty()) fail_validation("cache directory must be named");
    fs::create_directories(dir_);
}

std::string ResponseCache::key_of(const std::string& endpoint, const std::string& prompt,
                                  const std::string& attachment_digest) {
    return sha256_hex(endpoint + "\n" + normalize_ws(prompt) + "\n" + attachment_digest);
}

std::string ResponseCache::path_of(const std::string& key) const { return dir_ + "/" + key + ".json"; }

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
    std::string path = path_of(key);
    std::shared_lock<std::shared_mutex> lk(mu_);
    if (!fs::exists(path)) {
        ++misses_;
        return std::nullopt;
    }
    std::vector<uint8_t> bytes = read_file_bytes(path);
    json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded() || !j.contains("response"))
        fail_validation(strf("cache entry %s is unreadable", key.c_str()));
    ++hits_;
    return j["response"].get<std::string>();
}

void ResponseCache::insert(const std::string& key, const std::string& endpoint,
                           const std::string& response) {
    std::unique_lock<std::shared_mutex> lk(mu_);
    std::string path = path_of(key);
    if (fs::exists(path)) {
        std::vector<uint8_t> bytes = read_file_bytes(path);
        json prev = json::parse(bytes.begin(), bytes.end(), nullptr, false);
        if (prev.is_discarded() || prev.value("response", "") != response)
            fail_validation(strf("cache key %s already holds a different response", key.c_str()));
        return;  // identical payload, keep the original file
    }
    auto now = std::chrono::system_clock::now().time_since_epoch();
    json entry = {{"endpoint", endpoint},
                  {"response", response},
                  {"stored_at_ms", std::chrono::duration_cast<std::chrono::milliseconds>(now).count()}};
    write_file_atomic(path, entry.dump());
}

int ResponseCache::hits() const { return hits_.load(); }

int ResponseCache::misses() const { return misses_.load(); }

std::string cached_call(ExternalClient& client, ResponseCache* cache, const ClientRequest& req,
                        const std::function<bool(const std::string&)>& acceptable, bool* hit) {
    if (hit) *hit = false;
    if (!cache) return client.call(req);
    std::string key = ResponseCache::key_of(client.endpoint(), req.prompt, req.attachment_digest);
    if (auto held = cache->lookup(key)) {
        if (hit) *hit = true;
        return *held;
    }
    std::string response = client.call(req);
    if (!acceptable || acceptable(response)) cache->insert(key, client.endpoint(), response);
    return response;
}

}  // namespace ssr
