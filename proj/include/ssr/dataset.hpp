#pragma once

#include <string>
#include <vector>

#include "ssr/sample.hpp"

namespace ssr {

// Writes records + their rasters under dir:
//   dir/<name>.jsonl, dir/images/*.ppm, dir/depths/*.pgm
// JSONL keys per record: id, image, depth, depth_min, depth_max, question,
// rationale, answer, source, bboxes. Output bytes are a pure function of the
// records (sorted keys, shortest float round-trip).
void write_dataset(const std::string& dir, const std::string& name,
                   const std::vector<Sample>& records);

// load_pixels=false skips raster files (metadata-only pass)
std::vector<Sample> read_dataset(const std::string& dir, const std::string& name,
                                 bool load_pixels = true);

// single-record (de)serialization, exposed for the pipeline outputs
std::string sample_to_jsonl_line(const Sample& s);
Sample sample_from_jsonl_line(const std::string& line, int line_no);

// fills s.image/s.depth from the raster files referenced by s, relative to dir
void load_rasters(const std::string& dir, Sample& s);

}  // namespace ssr
