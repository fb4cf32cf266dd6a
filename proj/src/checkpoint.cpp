#include "ssr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ssr/image_io.hpp"
#include "ssr/sha256.hpp"

namespace ssr {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "SSRCKPT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

void append_doubles(std::vector<uint8_t>& blob, const Mat& m) {
    size_t at = blob.size();
    blob.resize(at + m.count() * sizeof(double));
    std::memcpy(blob.data() + at, m.a.data(), m.count() * sizeof(double));
}

void read_doubles(const std::vector<uint8_t>& blob, size_t offset_doubles, Mat& m) {
    size_t bytes = m.count() * sizeof(double);
    size_t at = offset_doubles * sizeof(double);
    if (at + bytes > blob.size()) fail_validation("checkpoint blob too short");
    std::memcpy(m.a.data(), blob.data() + at, bytes);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, const AdamW* opt,
                     const json& config_echo, const json& meta) {
    std::vector<uint8_t> blob;
    json params = json::array();
    size_t offset = 0;
    for (const Param* p : ps.all()) {
        params.push_back({{"name", p->name},
                          {"rows", p->w.rows},
                          {"cols", p->w.cols},
                          {"offset", offset},
                          {"trainable", p->trainable}});
        append_doubles(blob, p->w);
        offset += p->w.count();
    }
    json optim = nullptr;
    if (opt) {
        json slots = json::array();
        for (size_t i = 0; i < opt->params().size(); ++i) {
            const Param* p = opt->params()[i];
            slots.push_back({{"name", p->name}, {"offset_m", offset}});
            append_doubles(blob, opt->m[i]);
            offset += opt->m[i].count();
            slots.back()["offset_v"] = offset;
            append_doubles(blob, opt->v[i]);
            offset += opt->v[i].count();
        }
        optim = {{"t", opt->t}, {"slots", slots}};
    }
    json header = {{"format", 1},
                   {"config", config_echo},
                   {"params", params},
                   {"optim", optim},
                   {"meta", meta},
                   {"data_doubles", offset},
                   {"sha256", sha256_hex(blob)}};
    std::string head = header.dump();
    std::string out;
    out.reserve(kMagicLen + 8 + head.size() + blob.size());
    out.append(kMagic, kMagicLen);
    uint64_t hlen = head.size();
    out.append(reinterpret_cast<const char*>(&hlen), 8);
    out.append(head);
    out.append(reinterpret_cast<const char*>(blob.data()), blob.size());
    write_file_atomic(path, out);
}

namespace {

struct RawCheckpoint {
    json header;
    std::vector<uint8_t> blob;
};

RawCheckpoint read_raw(const std::string& path, bool want_blob) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < kMagicLen + 8 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
        fail_validation(strf("%s is not a checkpoint", path.c_str()));
    uint64_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + kMagicLen, 8);
    size_t head_at = kMagicLen + 8;
    if (head_at + hlen > bytes.size()) fail_validation("checkpoint header truncated");
    json header;
    try {
        header = json::parse(bytes.begin() + head_at, bytes.begin() + head_at + hlen);
    } catch (const json::exception& e) {
        fail_validation(strf("checkpoint header unreadable: %s", e.what()));
    }
    RawCheckpoint rc;
    rc.header = std::move(header);
    if (want_blob) {
        rc.blob.assign(bytes.begin() + head_at + hlen, bytes.end());
        size_t want = rc.header.at("data_doubles").get<size_t>() * sizeof(double);
        if (rc.blob.size() != want)
            fail_validation(strf("checkpoint blob is %zu bytes, header says %zu", rc.blob.size(),
                                 want));
        if (sha256_hex(rc.blob) != rc.header.at("sha256").get<std::string>())
            fail_validation("checkpoint blob digest mismatch");
    }
    return rc;
}

}  // namespace

json read_checkpoint_header(const std::string& path) { return read_raw(path, false).header; }

json load_checkpoint(const std::string& path, ParamStore& ps, AdamW* opt) {
    RawCheckpoint rc = read_raw(path, true);
    const json& params = rc.header.at("params");
    if (params.size() != ps.all().size())
        fail_validation(strf("checkpoint has %zu parameters, model has %zu", params.size(),
                             ps.all().size()));
    for (const json& pj : params) {
        std::string name = pj.at("name").get<std::string>();
        Param* p = ps.find(name);
        if (!p) fail_validation(strf("checkpoint parameter %s not in model", name.c_str()));
        if (p->w.rows != pj.at("rows").get<int>() || p->w.cols != pj.at("cols").get<int>())
            fail_validation(strf("checkpoint parameter %s shape mismatch", name.c_str()));
        read_doubles(rc.blob, pj.at("offset").get<size_t>(), p->w);
    }
    if (opt) {
        if (rc.header.at("optim").is_null())
            fail_validation("checkpoint carries no optimizer state");
        const json& oj = rc.header.at("optim");
        const json& slots = oj.at("slots");
        if (slots.size() != opt->params().size())
            fail_validation("optimizer slot count mismatch");
        for (size_t i = 0; i < opt->params().size(); ++i) {
            const json& sj = slots[i];
            if (sj.at("name").get<std::string>() != opt->params()[i]->name)
                fail_validation(strf("optimizer slot %zu holds %s, expected %s", i,
                                     sj.at("name").get<std::string>().c_str(),
                                     opt->params()[i]->name.c_str()));
            read_doubles(rc.blob, sj.at("offset_m").get<size_t>(), opt->m[i]);
            read_doubles(rc.blob, sj.at("offset_v").get<size_t>(), opt->v[i]);
        }
        opt->t = oj.at("t").get<int>();
    }
    return rc.header;
}

}  // namespace ssr
