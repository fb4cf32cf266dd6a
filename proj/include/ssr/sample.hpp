#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ssr/mat.hpp"

namespace ssr {

enum class SourceKind { synthetic, llava_cot, visual_cot, vocot, spatialqa };

std::string source_name(SourceKind s);
SourceKind source_from_name(const std::string& name);

// pixel box, 0 <= x1 < x2 <= W and 0 <= y1 < y2 <= H (x = column, y = row)
struct BBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

// One dataset record. Pixel data is held in memory after loading; the JSONL
// record stores relative paths to the image and depth files.
struct Sample {
    std::string id;
    std::string image_path;  // 8-bit RGB
    std::string depth_path;  // 16-bit grayscale + linear scale below
    int h = 0, w = 0;
    std::vector<float> image;  // h*w*3, values in [0,1]
    std::vector<float> depth;  // h*w, meters, finite and positive
    float depth_min = 0.0f, depth_max = 0.0f;
    std::string question;
    std::optional<std::string> rationale;
    std::string answer;
    SourceKind source = SourceKind::synthetic;
    std::vector<BBox> bboxes;

    void validate() const;  // throws ValidationError naming the offending field
};

// role-tagged feature matrix passed between modules
enum class FeatureRole { visual, depth, latent, text_embedding };

struct FeatureSeq {
    Mat m;
    FeatureRole role = FeatureRole::visual;
};

}  // namespace ssr
