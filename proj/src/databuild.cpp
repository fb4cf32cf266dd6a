#include "ssr/databuild.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "ssr/dataset.hpp"
#include "ssr/image_io.hpp"
#include "ssr/qa.hpp"
#include "ssr/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssr {

const char* kSplitNames[3] = {"train", "val", "test"};

Sample build_sample(const RunConfig& cfg, uint64_t seed, const std::string& split, int index) {
    uint64_t s = mix_seed(mix_seed(seed, split), uint64_t(index));
    Rng rng(mix_seed(s, "sample"));

    int n_obj = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
    TaskKind task = all_tasks()[size_t(index) % all_tasks().size()];
    Scene scene = generate_scene(n_obj, cfg.canvas, cfg.canvas, mix_seed(s, "scene"),
                                 cfg.background_depth);
    QaItem qa = make_qa(scene, task, mix_seed(s, "qa"));
    Rendered r = render_scene(scene);

    if (cfg.depth_noise_sigma > 0.0) {
        // multiplicative log-normal noise emulating an imperfect depth estimator
        Rng nrng(mix_seed(s, "noise"));
        for (float& d : r.depth) d = float(d * std::exp(cfg.depth_noise_sigma * nrng.normal()));
    }

    Sample out;
    out.id = strf("%s-%06d", split.c_str(), index);
    out.image_path = "images/" + out.id + ".ppm";
    out.depth_path = "depths/" + out.id + ".pgm";
    out.h = r.h;
    out.w = r.w;
    out.image = std::move(r.image);
    out.depth = std::move(r.depth);
    auto [mn, mx] = std::minmax_element(out.depth.begin(), out.depth.end());
    out.depth_min = *mn;
    out.depth_max = *mx;

    out.question = qa.question;
    double u = rng.uniform();
    if (u < cfg.preamble_full_prob)
        out.question = qa.rationale() + " " + qa.question;
    else if (u < cfg.preamble_full_prob + cfg.preamble_facts_prob)
        out.question = qa.facts + " " + qa.question;

    out.rationale = qa.rationale();
    out.answer = qa.answer;
    out.source = SourceKind::synthetic;
    for (const SceneObject& o : scene.objects) out.bboxes.push_back(o.bbox());
    out.validate();
    return out;
}

BuildResult build_dataset(const BuildSpec& spec, const std::string& out_dir) {
    if (spec.n < 1) fail_validation("build_dataset: n must be >= 1");
    double sum = 0.0;
    for (double r : spec.ratios) {
        if (r < 0.0) fail_validation("build_dataset: split ratios must be >= 0");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail_validation("build_dataset: split ratios must sum to 1");

    // largest-remainder apportioning, ties resolved in split order
    std::array<int, 3> counts;
    std::array<double, 3> frac;
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double exact = spec.n * spec.ratios[size_t(i)];
        counts[size_t(i)] = int(std::floor(exact + 1e-9));
        frac[size_t(i)] = exact - counts[size_t(i)];
        assigned += counts[size_t(i)];
    }
    while (assigned < spec.n) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (frac[size_t(i)] > frac[size_t(best)] + 1e-12) best = i;
        ++counts[size_t(best)];
        frac[size_t(best)] = -1.0;
        ++assigned;
    }

    fs::create_directories(out_dir);
    BuildResult result;
    result.counts = counts;
    json task_counts_json = json::object();
    for (int sp = 0; sp < 3; ++sp) {
        std::vector<Sample> records;
        std::map<std::string, int> split_tasks;
        for (int i = 0; i < counts[size_t(sp)]; ++i) {
            Sample s = build_sample(spec.cfg, spec.seed, kSplitNames[sp], i);
            TaskKind task = all_tasks()[size_t(i) % all_tasks().size()];
            ++split_tasks[task_subtask(task)];
            ++result.task_counts[task_subtask(task)];
            records.push_back(std::move(s));
        }
        write_dataset(out_dir, kSplitNames[sp], records);
        json jt = json::object();
        for (const auto& [k, v] : split_tasks) jt[k] = v;
        task_counts_json[kSplitNames[sp]] = jt;
    }

    json manifest;
    manifest["generator"] = "synthetic-scenes-v1";
    manifest["n"] = spec.n;
    manifest["seed"] = spec.seed;
    manifest["counts"] = {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}};
    manifest["task_counts"] = task_counts_json;
    manifest["data"] = spec.cfg.to_json()["data"];
    write_file_atomic((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    return result;
}

}  // namespace ssr
