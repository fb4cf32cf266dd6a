#include "ssr/evalrun.hpp"

#include <filesystem>
#include <fstream>

#include "ssr/image_io.hpp"
#include "ssr/parallel.hpp"

namespace ssr {

EvalMode eval_mode_from_name(const std::string& name) {
    if (name == "exact") return EvalMode::exact;
    if (name == "judge") return EvalMode::judge;
    fail_validation("unknown eval mode: " + name);
}

double BenchReport::average_accuracy() const {
    if (tasks.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [key, st] : tasks) sum += st.accuracy();
    return sum / double(tasks.size());
}

double BenchReport::sum_accuracy() const {
    double sum = 0.0;
    for (const auto& [key, st] : tasks) sum += st.accuracy();
    return sum;
}

std::string generate_answer(const SsrModel& m, const Sample& s, bool with_latents, int max_new,
                            const Mat* inject) {
    Mat patches = m.vlm_patches(s);
    std::vector<int> prompt = m.q_ids(s);
    std::vector<int> ids;
    if (with_latents) {
        Mat z = inject ? *inject : m.latents_value(s);
        ids = m.vlm.generate(patches, &z, prompt, Tokenizer::kEos, max_new);
    } else {
        ids = m.vlm.generate(patches, nullptr, prompt, Tokenizer::kEos, max_new);
    }
    return m.tok.decode(ids);
}

void write_latents_file(const std::string& path,
                        const std::vector<std::pair<std::string, Mat>>& entries) {
    std::string out;
    for (const auto& [id, z] : entries) {
        nlohmann::json j;
        j["id"] = id;
        j["rows"] = z.rows;
        j["cols"] = z.cols;
        j["data"] = z.a;
        out += j.dump() + "\n";
    }
    write_file_atomic(path, out);
}

std::map<std::string, Mat> read_latents_file(const std::string& path) {
    std::map<std::string, Mat> out;
    std::ifstream is(path);
    if (!is) fail_validation("cannot open latents file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail_validation(strf("latents file line %d: %s", lineno, e.what()));
        }
        if (!j.contains("id") || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
            fail_validation(strf("latents file line %d: missing id/rows/cols/data", lineno));
        std::string id = j.at("id").get<std::string>();
        if (out.count(id)) fail_validation("latents file repeats id " + id);
        Mat z(j.at("rows").get<int>(), j.at("cols").get<int>());
        if (z.rows < 1 || z.cols < 1)
            fail_validation(strf("latents file line %d: bad shape", lineno));
        std::vector<double> data = j.at("data").get<std::vector<double>>();
        if (data.size() != z.count())
            fail_validation(strf("latents file line %d: data length does not match shape", lineno));
        z.a = std::move(data);
        out.emplace(std::move(id), std::move(z));
    }
    return out;
}

BenchReport run_benchmark(const SsrModel& m, const std::vector<BenchRecord>& records,
                          const EvalOptions& opt, std::vector<EvalRow>* rows) {
    if (opt.parallelism < 1) fail_validation("parallelism must be >= 1");
    if (opt.max_new < 1) fail_validation("max_new must be >= 1");
    if (opt.mode == EvalMode::judge && !opt.judge_client)
        fail_validation("judge mode needs a judge client");
    for (const BenchRecord& r : records)
        if (r.category.empty() || r.subtask.empty())
            fail_validation("benchmark record " + r.sample.id + " is unlabeled");

    std::vector<EvalRow> local(records.size());
    parallel_indexed(int(records.size()), opt.parallelism, [&](int i, int) {
        const BenchRecord& r = records[size_t(i)];
        EvalRow& row = local[size_t(i)];
        row.id = r.sample.id;
        row.category = r.category;
        row.subtask = r.subtask;
        const Mat* inject = nullptr;
        if (opt.latents_file && opt.with_latents) {
            auto it = opt.latents_file->find(r.sample.id);
            if (it == opt.latents_file->end())
                fail_validation("latents file has no entry for " + r.sample.id);
            if (it->second.rows != m.cfg.latent_tokens || it->second.cols != m.cfg.d_vlm)
                fail_validation("latents for " + r.sample.id + " have the wrong shape");
            inject = &it->second;
        }
        row.response = generate_answer(m, r.sample, opt.with_latents, opt.max_new, inject);
        if (opt.mode == EvalMode::exact) {
            row.correct = row.response == r.sample.answer;
            row.score = row.correct ? 5.0 : 0.0;
        } else {
            JudgeResult jr =
                judge(r.sample.question, r.sample.answer, row.response, *opt.judge_client, opt.cache);
            row.correct = jr.pred;
            row.score = jr.score;
        }
    });

    BenchReport rep;
    for (const EvalRow& row : local) {
        TaskStat& st = rep.tasks[{row.category, row.subtask}];
        ++st.n;
        ++rep.n_total;
        if (row.correct) {
            ++st.correct;
            ++rep.correct_total;
        }
        st.score_sum += row.score;
        rep.score_total += row.score;
    }
    if (rows) *rows = std::move(local);
    return rep;
}

std::string report_csv(const BenchReport& r) {
    std::string out = "category,subtask,n,accuracy,mean_score\n";
    for (const auto& [key, st] : r.tasks)
        out += strf("%s,%s,%d,%.4f,%.4f\n", key.first.c_str(), key.second.c_str(), st.n,
                    st.accuracy(), st.mean_score());
    out += strf("all,micro,%d,%.4f,%.4f\n", r.n_total, r.overall_accuracy(), r.mean_score());
    out += strf("all,average,%d,%.4f,\n", int(r.tasks.size()), r.average_accuracy());
    out += strf("all,summation,%d,%.4f,\n", int(r.tasks.size()), r.sum_accuracy());
    return out;
}

std::string report_table(const BenchReport& r) {
    std::string out;
    out += strf("%-10s %-36s %6s %10s %10s\n", "category", "subtask", "n", "accuracy", "score");
    out += std::string(76, '-') + "\n";
    for (const auto& [key, st] : r.tasks)
        out += strf("%-10s %-36s %6d %9.2f%% %10.3f\n", key.first.c_str(), key.second.c_str(),
                    st.n, st.accuracy(), st.mean_score());
    out += std::string(76, '-') + "\n";
    out += strf("%-10s %-36s %6d %9.2f%% %10.3f\n", "all", "micro", r.n_total,
                r.overall_accuracy(), r.mean_score());
    out += strf("%-10s %-36s %6d %9.2f%%\n", "all", "average", int(r.tasks.size()),
                r.average_accuracy());
    out += strf("%-10s %-36s %6d %9.2f\n", "all", "summation", int(r.tasks.size()),
                r.sum_accuracy());
    return out;
}

void write_report(const std::string& path, const BenchReport& r) {
    write_file_atomic(path, report_csv(r));
    std::filesystem::path table(path);
    table.replace_extension(".txt");
    if (table == std::filesystem::path(path)) table += ".table.txt";
    write_file_atomic(table.string(), report_table(r));
}

}  // namespace ssr
