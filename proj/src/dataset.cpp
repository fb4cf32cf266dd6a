#include "ssr/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "ssr/common.hpp"
#include "ssr/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssr {

std::string source_name(SourceKind s) {
    switch (s) {
        case SourceKind::synthetic: return "synthetic";
        case SourceKind::llava_cot: return "llava-cot";
        case SourceKind::visual_cot: return "visual-cot";
        case SourceKind::vocot: return "vocot";
        case SourceKind::spatialqa: return "spatialqa";
    }
    fail_runtime("bad SourceKind");
}

SourceKind source_from_name(const std::string& name) {
    if (name == "synthetic") return SourceKind::synthetic;
    if (name == "llava-cot") return SourceKind::llava_cot;
    if (name == "visual-cot") return SourceKind::visual_cot;
    if (name == "vocot") return SourceKind::vocot;
    if (name == "spatialqa") return SourceKind::spatialqa;
    fail_validation("unknown source: " + name);
}

void Sample::validate() const {
    if (id.empty()) fail_validation("sample: field id empty");
    if (h <= 0 || w <= 0) fail_validation("sample " + id + ": bad raster size");
    if (image.size() != size_t(h) * size_t(w) * 3)
        fail_validation("sample " + id + ": field image has wrong element count");
    if (depth.size() != size_t(h) * size_t(w))
        fail_validation("sample " + id + ": field depth has wrong element count");
    for (float d : depth)
        if (!std::isfinite(d) || d <= 0.0f)
            fail_validation("sample " + id + ": field depth has non-finite or non-positive value");
    if (answer.empty()) fail_validation("sample " + id + ": field answer empty");
    for (const BBox& b : bboxes)
        if (!(0 <= b.x1 && b.x1 < b.x2 && b.x2 <= w && 0 <= b.y1 && b.y1 < b.y2 && b.y2 <= h))
            fail_validation("sample " + id + ": field bboxes out of bounds");
}

std::string sample_to_jsonl_line(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["image"] = s.image_path;
    j["depth"] = s.depth_path;
    j["depth_min"] = s.depth_min;
    j["depth_max"] = s.depth_max;
    j["question"] = s.question;
    if (s.rationale)
        j["rationale"] = *s.rationale;
    else
        j["rationale"] = nullptr;
    j["answer"] = s.answer;
    j["source"] = source_name(s.source);
    if (s.bboxes.empty()) {
        j["bboxes"] = nullptr;
    } else {
        json arr = json::array();
        for (const BBox& b : s.bboxes) arr.push_back(json::array({b.x1, b.y1, b.x2, b.y2}));
        j["bboxes"] = arr;
    }
    return j.dump();
}

namespace {

// pulls a required key, failing with the record's line number and field name
const json& need(const json& j, const char* key, int line_no) {
    auto it = j.find(key);
    if (it == j.end())
        fail_validation(strf("dataset line %d: field %s absent", line_no, key));
    return *it;
}

}  // namespace

Sample sample_from_jsonl_line(const std::string& line, int line_no) {
    json j;
    try {
        j = json::parse(line);
    } catch (const std::exception& e) {
        fail_validation(strf("dataset line %d: malformed json (%s)", line_no, e.what()));
    }
    Sample s;
    try {
        s.id = need(j, "id", line_no).get<std::string>();
        s.image_path = need(j, "image", line_no).get<std::string>();
        s.depth_path = need(j, "depth", line_no).get<std::string>();
        s.depth_min = need(j, "depth_min", line_no).get<float>();
        s.depth_max = need(j, "depth_max", line_no).get<float>();
        s.question = need(j, "question", line_no).get<std::string>();
        const json& r = need(j, "rationale", line_no);
        if (!r.is_null()) s.rationale = r.get<std::string>();
        s.answer = need(j, "answer", line_no).get<std::string>();
        s.source = source_from_name(need(j, "source", line_no).get<std::string>());
        const json& bb = need(j, "bboxes", line_no);
        if (!bb.is_null()) {
            for (const json& e : bb) {
                if (!e.is_array() || e.size() != 4)
                    fail_validation(strf("dataset line %d: field bboxes malformed", line_no));
                s.bboxes.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>(), e[3].get<int>()});
            }
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        fail_validation(strf("dataset line %d: bad field type (%s)", line_no, e.what()));
    }
    return s;
}

void write_dataset(const std::string& dir, const std::string& name,
                   const std::vector<Sample>& records) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "depths");
    std::string lines;
    for (const Sample& s : records) {
        s.validate();
        if (s.image_path.empty() || s.depth_path.empty())
            fail_validation("sample " + s.id + ": raster paths not set");
        Rgb8 img;
        img.h = s.h;
        img.w = s.w;
        img.px.resize(s.image.size());
        for (size_t i = 0; i < s.image.size(); ++i) {
            float v = s.image[i];
            if (v < 0.0f) v = 0.0f;
            if (v > 1.0f) v = 1.0f;
            img.px[i] = uint8_t(lroundf(v * 255.0f));
        }
        write_ppm8((fs::path(dir) / s.image_path).string(), img);
        write_pgm16((fs::path(dir) / s.depth_path).string(),
                    depth_to_gray16(s.depth, s.h, s.w, s.depth_min, s.depth_max));
        lines += sample_to_jsonl_line(s);
        lines += "\n";
    }
    write_file_atomic((fs::path(dir) / (name + ".jsonl")).string(), lines);
}

void load_rasters(const std::string& dir, Sample& s) {
    std::string ipath = (fs::path(dir) / s.image_path).string();
    if (!fs::exists(ipath)) fail_runtime("missing image file: " + ipath);
    Rgb8 img = read_ppm8(ipath);
    s.h = img.h;
    s.w = img.w;
    s.image.resize(img.px.size());
    for (size_t i = 0; i < img.px.size(); ++i) s.image[i] = float(img.px[i]) / 255.0f;
    std::string dpath = (fs::path(dir) / s.depth_path).string();
    if (!fs::exists(dpath)) fail_runtime("missing depth file: " + dpath);
    Gray16 g = read_pgm16(dpath);
    if (g.h != s.h || g.w != s.w)
        fail_validation("sample " + s.id + ": image/depth raster sizes differ");
    s.depth = gray16_to_depth(g, s.depth_min, s.depth_max);
    s.validate();
}

std::vector<Sample> read_dataset(const std::string& dir, const std::string& name,
                                 bool load_pixels) {
    std::string path = (fs::path(dir) / (name + ".jsonl")).string();
    std::ifstream is(path);
    if (!is) fail_runtime("cannot open dataset: " + path);
    std::vector<Sample> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        Sample s = sample_from_jsonl_line(line, line_no);
        if (load_pixels) load_rasters(dir, s);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ssr
