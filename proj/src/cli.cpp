#include "ssr/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssr/annotate.hpp"
#include "ssr/benchbuild.hpp"
#include "ssr/checkpoint.hpp"
#include "ssr/databuild.hpp"
#include "ssr/dataset.hpp"
#include "ssr/evalrun.hpp"
#include "ssr/image_io.hpp"
#include "ssr/similarity.hpp"
#include "ssr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssr {
namespace {

struct CommonOpts {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    int64_t seed = -1;  // negative means "keep the config's seed"
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config, "json config file");
    sub->add_option("--set", c.sets, "dotted config override, key=value (repeatable)");
    sub->add_option("--out", c.out, "run directory (default runs/<timestamp>-seed<seed>)");
    sub->add_option("--seed", c.seed, "override the config seed");
}

RunConfig resolve_config(const CommonOpts& c) {
    RunConfig cfg = load_config(c.config, c.sets);
    if (c.seed >= 0) cfg.seed = uint64_t(c.seed);
    cfg.validate();
    return cfg;
}

std::string prepare_run_dir(const CommonOpts& c, const RunConfig& cfg) {
    std::string dir = c.out;
    if (dir.empty()) {
        std::time_t tt = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&tt, &tm);
        dir = strf("runs/%04d%02d%02d-%02d%02d%02d-seed%llu", tm.tm_year + 1900, tm.tm_mon + 1,
                   tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                   (unsigned long long)cfg.seed);
    }
    fs::create_directories(dir);
    write_file_atomic((fs::path(dir) / "resolved_config.json").string(),
                      cfg.to_json().dump(2) + "\n");
    return dir;
}

// dir/name pair from a path like data/train.jsonl
std::pair<std::string, std::string> split_jsonl_path(const std::string& path) {
    fs::path p(path);
    if (p.extension() != ".jsonl") fail_validation("expected a .jsonl path: " + path);
    std::string dir = p.parent_path().string();
    if (dir.empty()) dir = ".";
    return {dir, p.stem().string()};
}

std::array<double, 3> parse_ratios(const std::string& text) {
    std::array<double, 3> r{};
    char tail = 0;
    if (sscanf(text.c_str(), "%lf,%lf,%lf%c", &r[0], &r[1], &r[2], &tail) != 3)
        fail_validation("ratios must be three comma-separated numbers: " + text);
    return r;
}

struct DatagenOpts {
    CommonOpts common;
    int n = 100;
    std::string ratios;
};

int do_datagen(const DatagenOpts& o) {
    RunConfig cfg = resolve_config(o.common);
    std::string dir = prepare_run_dir(o.common, cfg);
    BuildSpec spec;
    spec.n = o.n;
    spec.seed = cfg.seed;
    spec.cfg = cfg;
    if (!o.ratios.empty()) spec.ratios = parse_ratios(o.ratios);
    BuildResult res = build_dataset(spec, dir);
    printf("datagen: %d train / %d val / %d test records under %s\n", res.counts[0],
           res.counts[1], res.counts[2], dir.c_str());
    return 0;
}

struct TrainOpts {
    CommonOpts common;
    std::string data;
    std::string init;
};

int do_train(const TrainOpts& o, const std::vector<Stage>& stages) {
    RunConfig cfg = resolve_config(o.common);
    std::string dir = prepare_run_dir(o.common, cfg);
    auto [ddir, dname] = split_jsonl_path(o.data);
    std::vector<Sample> train = read_dataset(ddir, dname, true);
    std::vector<Sample> val;
    if (dname != "val" && fs::exists(fs::path(ddir) / "val.jsonl"))
        val = read_dataset(ddir, "val", true);

    SsrModel m(cfg, Tokenizer::synthetic_default());
    if (!o.init.empty()) load_checkpoint(o.init, m.ps, nullptr);
    Trainer t(m, dir);
    for (Stage st : stages) {
        TrainResult res = t.run(st, train, val);
        printf("%s: %d epochs, %d steps, train loss %.6f, val loss %.6f\n", stage_name(st),
               res.epochs_run, res.global_steps, res.train_loss, res.val_loss);
        printf("checkpoint: %s\n", t.checkpoint_path(st, stage_epochs(cfg, st) - 1).c_str());
    }
    return 0;
}

struct EvalOpts {
    CommonOpts common;
    std::string benchmark;
    std::string checkpoint;
    std::string mode = "exact";
    std::string judge_client = "mock";
    std::string client_url;
    std::string report;
    std::string cache_dir;
    std::string latents;
    bool no_latents = false;
    int max_new = 16;
};

int do_eval(const EvalOpts& o) {
    RunConfig cfg = resolve_config(o.common);
    std::string dir = prepare_run_dir(o.common, cfg);
    auto [bdir, bname] = split_jsonl_path(o.benchmark);
    std::vector<BenchRecord> records = read_benchmark(bdir, bname, true);

    SsrModel m(cfg, Tokenizer::synthetic_default());
    load_checkpoint(o.checkpoint, m.ps, nullptr);

    EvalOptions opt;
    opt.mode = eval_mode_from_name(o.mode);
    opt.with_latents = !o.no_latents;
    opt.parallelism = cfg.parallelism;
    opt.max_new = o.max_new;
    std::unique_ptr<ResponseCache> cache;
    if (!o.cache_dir.empty()) {
        cache = std::make_unique<ResponseCache>(o.cache_dir);
        opt.cache = cache.get();
    }
    std::unique_ptr<ExternalClient> jc;
    if (opt.mode == EvalMode::judge) {
        jc = make_client("judge", o.judge_client, o.client_url);
        opt.judge_client = jc.get();
    }
    std::map<std::string, Mat> table;
    if (!o.latents.empty()) {
        table = read_latents_file(o.latents);
        opt.latents_file = &table;
    }

    BenchReport rep = run_benchmark(m, records, opt);
    std::string report_path = o.report.empty() ? (fs::path(dir) / "report.csv").string() : o.report;
    write_report(report_path, rep);
    fputs(report_table(rep).c_str(), stdout);
    printf("eval: %d records, accuracy %.2f%%, report %s\n", rep.n_total, rep.overall_accuracy(),
           report_path.c_str());
    return 0;
}

struct AnnotateOpts {
    CommonOpts common;
    std::string data;
    std::string source = "synthetic";
    std::string client = "mock";
    std::string client_url;
    std::string cache_dir;
    double sample_rate = 0.25;
    double min_delta = 0.0;
};

int do_annotate(const AnnotateOpts& o) {
    RunConfig cfg = resolve_config(o.common);
    std::string dir = prepare_run_dir(o.common, cfg);
    auto [ddir, dname] = split_jsonl_path(o.data);
    std::vector<Sample> records = read_dataset(ddir, dname, true);

    auto spatial = make_client("spatial", o.client, o.client_url);
    auto writer = make_client("writer", o.client, o.client_url);
    auto answerer = make_client("answerer", o.client, o.client_url);
    auto judge_c = make_client("judge", o.client, o.client_url);
    std::unique_ptr<ResponseCache> cache;
    if (!o.cache_dir.empty()) cache = std::make_unique<ResponseCache>(o.cache_dir);
    AnnotateClients clients{spatial.get(), writer.get(), answerer.get(), judge_c.get(),
                            cache.get()};

    AnnotateConfig acfg;
    acfg.source = o.source;
    acfg.sample_rate = o.sample_rate;
    acfg.min_delta = o.min_delta;
    acfg.parallelism = cfg.parallelism;
    acfg.seed = cfg.seed;

    AnnotateResult res = annotate_run(records, acfg, clients, dir);
    printf("annotate: %d annotated, %d quarantined, %d returned; outputs under %s\n",
           res.annotated, res.quarantined, res.returned, dir.c_str());
    if (res.quality.checked > 0) {
        printf("quality: %d sampled, with %.1f%% / without %.1f%%, delta %.1f, %s\n",
               res.quality.checked, res.quality.with_acc, res.quality.without_acc,
               res.quality.with_acc - res.quality.without_acc,
               res.quality.passed ? "passed" : "FAILED");
        if (!res.quality.passed) {
            fprintf(stderr, "error: quality gate failed, halting for operator review\n");
            return 1;
        }
    }
    return 0;
}

struct BenchOpts {
    CommonOpts common;
    std::string data;
    std::string client = "mock";
    std::string client_url;
    std::string cache_dir;
    std::string name = "benchmark";
    std::string train_split = "train";
};

int do_bench_build(const BenchOpts& o) {
    RunConfig cfg = resolve_config(o.common);
    std::string dir = prepare_run_dir(o.common, cfg);
    auto [ddir, dname] = split_jsonl_path(o.data);
    if (o.name == dname) fail_validation("benchmark name would overwrite the source split");
    std::vector<Sample> records = read_dataset(ddir, dname, false);

    auto a = make_client("classifier-a", o.client, o.client_url);
    auto b = make_client("classifier-b", o.client, o.client_url);
    std::unique_ptr<ResponseCache> cache;
    if (!o.cache_dir.empty()) cache = std::make_unique<ResponseCache>(o.cache_dir);

    BenchBuildResult res = build_benchmark(records, *a, *b, cache.get(), cfg.parallelism);

    if (o.train_split != dname && fs::exists(fs::path(ddir) / (o.train_split + ".jsonl"))) {
        std::vector<Sample> train = read_dataset(ddir, o.train_split, false);
        auto clash = overlapping_ids(res.benchmark, train);
        if (!clash.empty())
            fail_validation(strf("%d benchmark ids collide with split %s (first: %s)",
                                 int(clash.size()), o.train_split.c_str(), clash[0].c_str()));
    }

    // the benchmark lives beside its source split so raster paths resolve
    write_benchmark(ddir, o.name, res.benchmark);
    write_file_atomic((fs::path(dir) / "bench_report.json").string(), res.report.dump(2) + "\n");
    printf("bench-build: %d of %d records kept, %d returned; %s\n",
           int(res.benchmark.size()), int(records.size()), int(res.returned.size()),
           (fs::path(ddir) / (o.name + ".jsonl")).string().c_str());
    return 0;
}

struct AnalyzeOpts {
    CommonOpts common;
    std::string data;
    std::string checkpoint;
    int n = 50;
};

int do_analyze_latents(const AnalyzeOpts& o) {
    RunConfig cfg = resolve_config(o.common);
    std::string dir = prepare_run_dir(o.common, cfg);
    auto [ddir, dname] = split_jsonl_path(o.data);
    std::vector<Sample> records = read_dataset(ddir, dname, true);
    if (o.n > 0 && int(records.size()) > o.n) records.resize(size_t(o.n));

    SsrModel m(cfg, Tokenizer::synthetic_default());
    if (!o.checkpoint.empty()) load_checkpoint(o.checkpoint, m.ps, nullptr);

    SimilarityResult r = similarity_analysis(m, records);
    write_similarity(dir, r);
    std::vector<std::pair<std::string, Mat>> entries;
    for (const Sample& s : records) entries.emplace_back(s.id, m.latents_value(s));
    write_latents_file((fs::path(dir) / "latents.jsonl").string(), entries);
    printf("analyze-latents: stat %.6f over %d samples (%d zero vectors); artifacts under %s\n",
           r.stat, r.n, r.zero_vectors, dir.c_str());
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"desk-scale latent spatial reasoning: data, training, annotation, evaluation"};
    app.name("ssr");
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    DatagenOpts dg;
    CLI::App* c_dg = app.add_subcommand("datagen", "build the synthetic dataset splits");
    add_common(c_dg, dg.common);
    c_dg->add_option("--n", dg.n, "total record count across splits");
    c_dg->add_option("--ratios", dg.ratios, "train,val,test ratios (default 0.8,0.1,0.1)");

    TrainOpts pv, s1, s2;
    CLI::App* c_pv = app.add_subcommand("pretrain-vlm", "pretrain the vision-language model");
    add_common(c_pv, pv.common);
    c_pv->add_option("--data", pv.data, "training split (.jsonl)")->required();
    c_pv->add_option("--init", pv.init, "checkpoint to continue from");

    CLI::App* c_s1 =
        app.add_subcommand("train-stage1", "pretrain the aligner, then align latents to it");
    add_common(c_s1, s1.common);
    c_s1->add_option("--data", s1.data, "training split (.jsonl)")->required();
    c_s1->add_option("--init", s1.init, "pretrained model checkpoint")->required();

    CLI::App* c_s2 = app.add_subcommand("train-stage2", "supervise answers with latents injected");
    add_common(c_s2, s2.common);
    c_s2->add_option("--data", s2.data, "training split (.jsonl)")->required();
    c_s2->add_option("--init", s2.init, "stage-1 checkpoint")->required();

    EvalOpts ev;
    CLI::App* c_ev = app.add_subcommand("eval", "grade a checkpoint over a benchmark");
    add_common(c_ev, ev.common);
    c_ev->add_option("--benchmark", ev.benchmark, "labeled benchmark (.jsonl)")->required();
    c_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
    c_ev->add_option("--mode", ev.mode, "exact | judge")
        ->check(CLI::IsMember({"exact", "judge"}));
    c_ev->add_option("--judge-client", ev.judge_client, "mock | live")
        ->check(CLI::IsMember({"mock", "live"}));
    c_ev->add_option("--client-url", ev.client_url, "live client base url");
    c_ev->add_option("--report", ev.report, "report csv path (default <run>/report.csv)");
    c_ev->add_option("--cache-dir", ev.cache_dir, "judge response cache directory");
    c_ev->add_option("--latents", ev.latents, "inject latents from this file instead");
    c_ev->add_flag("--no-latents", ev.no_latents, "evaluate the plain model without latents");
    c_ev->add_option("--max-new", ev.max_new, "generation budget per answer");

    AnnotateOpts an;
    CLI::App* c_an = app.add_subcommand("annotate", "run the rationale annotation pipeline");
    add_common(c_an, an.common);
    c_an->add_option("--data", an.data, "input records (.jsonl)")->required();
    c_an->add_option("--source", an.source, "visual-cot | vocot | spatialqa | synthetic")
        ->check(CLI::IsMember({"visual-cot", "vocot", "spatialqa", "synthetic"}));
    c_an->add_option("--client", an.client, "mock | live")
        ->check(CLI::IsMember({"mock", "live"}));
    c_an->add_option("--client-url", an.client_url, "live client base url");
    c_an->add_option("--cache-dir", an.cache_dir, "response cache directory");
    c_an->add_option("--sample-rate", an.sample_rate, "quality check sampling rate");
    c_an->add_option("--min-delta", an.min_delta, "required with-minus-without accuracy gain");

    BenchOpts bb;
    CLI::App* c_bb = app.add_subcommand("bench-build", "classify records into a benchmark");
    add_common(c_bb, bb.common);
    c_bb->add_option("--data", bb.data, "candidate records (.jsonl)")->required();
    c_bb->add_option("--client", bb.client, "mock | live")
        ->check(CLI::IsMember({"mock", "live"}));
    c_bb->add_option("--client-url", bb.client_url, "live client base url");
    c_bb->add_option("--cache-dir", bb.cache_dir, "response cache directory");
    c_bb->add_option("--name", bb.name, "output benchmark name (default benchmark)");
    c_bb->add_option("--train-split", bb.train_split, "split checked for id collisions");

    AnalyzeOpts al;
    CLI::App* c_al = app.add_subcommand("analyze-latents", "latent-rationale similarity analysis");
    add_common(c_al, al.common);
    c_al->add_option("--data", al.data, "records with rationales (.jsonl)")->required();
    c_al->add_option("--checkpoint", al.checkpoint, "model checkpoint (optional)");
    c_al->add_option("--n", al.n, "sample count cap (default 50)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_dg->parsed()) return do_datagen(dg);
        if (c_pv->parsed()) return do_train(pv, {Stage::pretrain_vlm});
        if (c_s1->parsed()) return do_train(s1, {Stage::pretrain_aligner, Stage::stage1});
        if (c_s2->parsed()) return do_train(s2, {Stage::stage2});
        if (c_ev->parsed()) return do_eval(ev);
        if (c_an->parsed()) return do_annotate(an);
        if (c_bb->parsed()) return do_bench_build(bb);
        if (c_al->parsed()) return do_analyze_latents(al);
        fail_validation("no subcommand selected");
    } catch (const ValidationError& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fprintf(stderr, "runtime error: %s\n", e.what());
        return 2;
    }
    return 0;
}

}  // namespace ssr
