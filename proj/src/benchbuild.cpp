#include "ssr/benchbuild.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "ssr/dataset.hpp"
#include "ssr/image_io.hpp"
#include "ssr/parallel.hpp"

namespace fs = std::filesystem;

namespace ssr {

using nlohmann::json;

std::string classify_prompt(const std::string& question) {
    std::string p;
    p += "You are an expert in image-based question classification.\n";
    p += "You need to classify each input question into a specific task type based on the "
         "following taxonomy.\n";
    p += "Task Categories:\n";
    p += "  Spatial:\n";
    p += "    Explanation: Involve identifying and understanding the position, size, shape, and "
         "relative relationships of objects in an image.\n";
    p += "    Subtasks:\n";
    p += "      Count: Counting objects in the image (e.g., questions like “How many "
         "...?”).\n";
    p += "      Relative Position Recognition: Determining spatial relations like “to the "
         "left of”, “above”, or “on the right”.\n";
    p += "      Position Based Object Recognition: Identifying an object based on its spatial "
         "relation to another object (e.g., “What is the object to the left of the "
         "dog?”).\n";
    p += "  General:\n";
    p += "    Explanation: Involve classifying, recognizing, or reasoning about visual content "
         "without necessarily focusing on spatial relations.\n";
    p += "    Subtasks:\n";
    p += "      Existence: Determining whether an object or feature is present (e.g., “Is "
         "there a cat?”).\n";
    p += "      Attribute Recognition: Identifying attributes like color, texture, size, or "
         "state (e.g., “What color is the apple?”).\n";
    p += "      Action Recognition: Recognizing what action or activity is occurring (e.g., "
         "“What is the man doing?”).\n";
    p += "\n";
    p += "For each input question:\n";
    p += "  First determine whether the question belongs to the spatial or general category.\n";
    p += "  Then classify it into one of the three subtasks under that category.\n";
    p += "  If the question does not match any of the subtasks under either category, return "
         "None.\n";
    p += "\n";
    p += "Output format:\n";
    p += "  {\"category\": \"spatial\" or \"general\", \"subtask\": \"subtask_name\" or "
         "\"None\"}\n";
    p += "\n";
    p += "Example Input: \"Is there a bicycle in the image?\"\n";
    p += "Example Output: {\"category\": \"general\", \"subtask\": \"existence\"}\n";
    p += "\n";
    p += "Now, let's begin classification. Here's the question:\n";
    p += "Question: " + question;
    return p;
}

namespace {

std::string lower_trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(a, b - a + 1);
    for (char& c : out) c = char(tolower(uint8_t(c)));
    return out;
}

// last balanced object wins: the prompt's own format examples precede any
// reply echoed back with the template
bool last_brace_span(const std::string& text, size_t& begin, size_t& end) {
    bool found = false;
    int depth = 0;
    bool in_str = false;
    size_t open = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_str) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_str = false;
            continue;
        }
        if (c == '"' && depth > 0) {
            in_str = true;
        } else if (c == '{') {
            if (depth == 0) open = i;
            ++depth;
        } else if (c == '}') {
            if (depth > 0 && --depth == 0) {
                begin = open;
                end = i + 1;
                found = true;
            }
        }
    }
    return found;
}

}  // namespace

bool parse_classification(const std::string& text, Classification& out) {
    size_t b = 0, e = 0;
    if (!last_brace_span(text, b, e)) return false;
    json j = json::parse(text.substr(b, e - b), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return false;
    if (!j.contains("category") || !j["category"].is_string()) return false;
    if (!j.contains("subtask") || !j["subtask"].is_string()) return false;
    std::string cat = lower_trim(j["category"].get<std::string>());
    if (cat != "spatial" && cat != "general") return false;
    std::string sub = lower_trim(j["subtask"].get<std::string>());
    if (sub.empty()) return false;
    out.category = cat;
    out.subtask = sub;
    return true;
}

BenchBuildResult build_benchmark(const std::vector<Sample>& records, ExternalClient& a,
                                 ExternalClient& b, ResponseCache* cache, int parallelism) {
    if (parallelism < 1) fail_validation("parallelism must be >= 1");
    a.reset_calls();
    b.reset_calls();

    struct Verdict {
        bool keep = false;
        Classification label;
        bool a_ok = false, b_ok = false;
    };
    std::vector<Verdict> verdicts(records.size());

    auto parseable = [](const std::string& r) {
        Classification scratch;
        return parse_classification(r, scratch);
    };

    parallel_indexed(int(records.size()), parallelism, [&](int i, int) {
        const Sample& s = records[size_t(i)];
        ClientRequest req{classify_prompt(s.question), attachment_digest(s)};
        Classification ca, cb;
        Verdict& v = verdicts[size_t(i)];
        v.a_ok = parse_classification(cached_call(a, cache, req, parseable), ca);
        v.b_ok = parse_classification(cached_call(b, cache, req, parseable), cb);
        if (v.a_ok && v.b_ok && ca.category == cb.category && ca.subtask == cb.subtask &&
            ca.subtask != "none") {
            v.keep = true;
            v.label = ca;
        }
    });

    BenchBuildResult res;
    std::map<std::pair<std::string, std::string>, int> counts;
    int rejected = 0, unparseable = 0;
    for (size_t i = 0; i < records.size(); ++i) {
        const Verdict& v = verdicts[i];
        if (v.keep) {
            res.benchmark.push_back({records[i], v.label.category, v.label.subtask});
            ++counts[{v.label.category, v.label.subtask}];
        } else {
            res.returned.push_back(records[i]);
            // consensus "none" lands in the rejected tally with disagreements
            if (!v.a_ok || !v.b_ok)
                ++unparseable;
            else
                ++rejected;
        }
    }

    json tasks = json::object();
    for (const auto& [key, n] : counts) tasks[key.first + "/" + key.second] = n;
    res.report = json{{"input_records", records.size()},
                      {"benchmark", res.benchmark.size()},
                      {"returned", res.returned.size()},
                      {"unparseable", unparseable},
                      {"rejected_by_rule", rejected},
                      {"tasks", tasks},
                      {"client_calls", {{a.endpoint(), a.calls()}, {b.endpoint(), b.calls()}}}};
    return res;
}

void write_benchmark(const std::string& dir, const std::string& name,
                     const std::vector<BenchRecord>& records) {
    std::string lines;
    for (const BenchRecord& r : records) {
        if (r.category.empty() || r.subtask.empty())
            fail_validation("benchmark record " + r.sample.id + " is unlabeled");
        json j = json::parse(sample_to_jsonl_line(r.sample));
        j["category"] = r.category;
        j["subtask"] = r.subtask;
        lines += j.dump();
        lines += "\n";
    }
    fs::create_directories(dir);
    write_file_atomic((fs::path(dir) / (name + ".jsonl")).string(), lines);
}

std::vector<BenchRecord> read_benchmark(const std::string& dir, const std::string& name,
                                        bool load_pixels) {
    std::string path = (fs::path(dir) / (name + ".jsonl")).string();
    std::ifstream is(path);
    if (!is) fail_runtime("cannot open benchmark: " + path);
    std::vector<BenchRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            fail_validation(strf("benchmark line %d: malformed json", line_no));
        if (!j.contains("category") || !j.contains("subtask"))
            fail_validation(strf("benchmark line %d: missing category/subtask", line_no));
        BenchRecord r;
        r.category = j["category"].get<std::string>();
        r.subtask = j["subtask"].get<std::string>();
        j.erase("category");
        j.erase("subtask");
        r.sample = sample_from_jsonl_line(j.dump(), line_no);
        if (load_pixels) load_rasters(dir, r.sample);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::string> overlapping_ids(const std::vector<BenchRecord>& bench,
                                         const std::vector<Sample>& split) {
    std::set<std::string> bench_ids;
    for (const BenchRecord& r : bench) bench_ids.insert(r.sample.id);
    std::vector<std::string> out;
    for (const Sample& s : split)
        if (bench_ids.count(s.id)) out.push_back(s.id);
    return out;
}

}  // namespace ssr
