#pragma once

#include <map>

#include "ssr/benchbuild.hpp"
#include "ssr/judge.hpp"
#include "ssr/trainer.hpp"

namespace ssr {

enum class EvalMode { exact, judge };
EvalMode eval_mode_from_name(const std::string& name);

struct TaskStat {
    int n = 0;
    int correct = 0;
    double score_sum = 0.0;
    double accuracy() const { return n ? 100.0 * correct / double(n) : 0.0; }
    double mean_score() const { return n ? score_sum / double(n) : 0.0; }
};

// Per-task tallies plus three aggregates: micro (over records), average
// (mean of task accuracies) and summation (sum of task accuracies). Tasks
// with no samples never appear.
struct BenchReport {
    std::map<std::pair<std::string, std::string>, TaskStat> tasks;
    int n_total = 0, correct_total = 0;
    double score_total = 0.0;
    double overall_accuracy() const { return n_total ? 100.0 * correct_total / double(n_total) : 0.0; }
    double average_accuracy() const;
    double sum_accuracy() const;
    double mean_score() const { return n_total ? score_total / double(n_total) : 0.0; }
};

struct EvalOptions {
    EvalMode mode = EvalMode::exact;
    bool with_latents = true;  // inject Z_R between patches and text
    int parallelism = 4;
    int max_new = 16;
    ExternalClient* judge_client = nullptr;  // judge mode only
    ResponseCache* cache = nullptr;
    // when set, Z_R comes from this table by record id instead of the reasoner
    const std::map<std::string, Mat>* latents_file = nullptr;
};

// one generated answer and its verdict, in benchmark order
struct EvalRow {
    std::string id, category, subtask, response;
    bool correct = false;
    double score = 0.0;
};

// Greedy-decodes an answer per record (optionally with the reasoner's latent
// tokens injected) and grades it by exact match or through the judge.
// Judge-mode accuracy is exactly the fraction of pred=true verdicts.
BenchReport run_benchmark(const SsrModel& m, const std::vector<BenchRecord>& records,
                          const EvalOptions& opt, std::vector<EvalRow>* rows = nullptr);

// answer text for one sample; inject overrides the reasoner's latents
std::string generate_answer(const SsrModel& m, const Sample& s, bool with_latents, int max_new,
                            const Mat* inject = nullptr);

// Standalone latents artifact: one JSON line per record holding the id and
// its K x d_vlm array, so the latents can cross a process boundary in either
// direction. Reading rejects duplicate ids and shape mismatches in the line.
void write_latents_file(const std::string& path,
                        const std::vector<std::pair<std::string, Mat>>& entries);
std::map<std::string, Mat> read_latents_file(const std::string& path);

std::string report_csv(const BenchReport& r);
std::string report_table(const BenchReport& r);
// CSV at path plus the rendered table at the same stem with extension .txt
void write_report(const std::string& path, const BenchReport& r);

}  // namespace ssr
