#pragma once

#include <optional>

#include "ssr/cache.hpp"
#include "ssr/judge.hpp"

#include "json.hpp"

namespace ssr {

struct Turn {
    std::string role;  // "user" or "assistant"
    std::string text;
};

struct QaPair {
    std::string question;
    std::string answer;
};

// True when a question cannot stand alone: it carries a bare personal
// pronoun, a dangling demonstrative, or a discourse reference to earlier
// turns. Spatial uses of "above"/"below" ("above the red circle") survive.
bool context_dependent(const std::string& question);

// Folds an alternating user/assistant conversation into standalone QA pairs,
// dropping context-dependent questions while preserving order. A conversation
// that does not alternate starting from user, or ends on an unanswered
// question, is malformed.
std::vector<QaPair> extract_one_turn(const std::vector<Turn>& conversation);

// "[x1,y1,x2,y2]" with no spaces
std::string bbox_str(const BBox& b);

// the fixed per-box and per-pair query templates; counts are part of the
// contract (14 and 6)
std::vector<std::string> spatial_queries(const BBox& b);
std::vector<std::string> pairwise_queries(const BBox& b1, const BBox& b2);

// rationale-generation prompt builders, one per source style
std::string visual_cot_prompt(const BBox& bbox, const std::string& transcript);
std::string vocot_prompt(const std::string& question, const std::string& answer,
                         const std::string& transcript);
std::string spatialqa_prompt(const std::string& question, const std::string& answer);

struct SpatialTranscript {
    std::vector<QaPair> qa;
    int calls = 0;       // external invocations actually made
    int cache_hits = 0;
    std::string text() const;  // "Q: ...\nA: ..." lines
};

// Runs the per-box queries (first box only for visual-cot, every box plus
// every pair otherwise) against the spatial client. spatialqa sources need no
// transcript and get an empty one.
SpatialTranscript collect_spatial_answers(const Sample& s, ExternalClient& spatial,
                                          ResponseCache* cache);

struct AnnotatedRecord {
    Sample sample;  // rationale replaced by the generated one
    std::string template_id;
    std::string spatial_client, rationale_client;
    int spatial_calls = 0, spatial_cache_hits = 0;
    bool rationale_cache_hit = false;
    double quality_score = -1.0;  // filled for records the quality check judged
};

struct RationaleOutcome {
    bool ok = false;
    AnnotatedRecord record;
    std::string raw;  // the unusable response when !ok
};

// Builds the source-appropriate prompt, consults the cache, validates the
// response (json object / coordinate-bearing paragraph / four sections) and
// retries once before giving up. Only validated responses enter the cache.
RationaleOutcome generate_rationale(const Sample& s, const SpatialTranscript& tr,
                                    ExternalClient& writer, ResponseCache* cache);

struct QualityReport {
    int checked = 0;
    double with_acc = 0.0, without_acc = 0.0;    // percent
    double with_score = 0.0, without_score = 0.0;  // mean 0..5
    bool passed = false;
};

// Judges a seeded uniform sample of the annotated records twice per record:
// answering with the rationale in the prompt and answering the bare
// question. Passes only when with-rationale accuracy exceeds the bare
// accuracy by strictly more than zero and at least min_delta points.
QualityReport quality_check(std::vector<AnnotatedRecord>& records, ExternalClient& answerer,
                            ExternalClient& judge_client, ResponseCache* cache,
                            double sample_rate, double min_delta, uint64_t seed);

struct AnnotateConfig {
    std::string source = "synthetic";  // visual-cot | vocot | spatialqa | synthetic
    double sample_rate = 0.25;
    double min_delta = 0.0;
    int parallelism = 4;
    uint64_t seed = 7;
};

struct AnnotateClients {
    ExternalClient* spatial = nullptr;
    ExternalClient* writer = nullptr;
    ExternalClient* answerer = nullptr;
    ExternalClient* judge = nullptr;
    ResponseCache* cache = nullptr;  // shared by every call in the run
};

struct AnnotateResult {
    int annotated = 0, quarantined = 0, returned = 0;
    QualityReport quality;
    nlohmann::json report;
};

// Drives the full forge over one record list: records of the selected source
// flow through spatial querying and rationale generation with bounded
// parallelism, everything else lands in the returned pile, and the quality
// check gates the batch. Writes annotated.jsonl, quarantine.jsonl,
// returned.jsonl and annotate_report.json under out_dir; the three record
// files are byte-deterministic, the report carries run diagnostics (calls,
// cache hits, per-record provenance).
AnnotateResult annotate_run(const std::vector<Sample>& records, const AnnotateConfig& cfg,
                            const AnnotateClients& clients, const std::string& out_dir);

}  // namespace ssr
