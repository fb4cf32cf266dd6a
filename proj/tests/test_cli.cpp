#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "ssr/cli.hpp"
#include "support.hpp"

using namespace ssr;
namespace fs = std::filesystem;

namespace {

std::string smoke_cfg() { return std::string(SSR_SOURCE_DIR) + "/configs/smoke.json"; }

int cli(std::vector<std::string> args) { return run_cli(args); }

// silences the usage text the failure paths print on purpose
struct MuteStderr {
    int saved;
    MuteStderr() {
        fflush(stderr);
        saved = dup(2);
        int null = open("/dev/null", O_WRONLY);
        dup2(null, 2);
        close(null);
    }
    ~MuteStderr() {
        fflush(stderr);
        dup2(saved, 2);
        close(saved);
    }
};

int datagen_into(const std::string& dir, int n, const std::string& extra_seed = "") {
    std::vector<std::string> args = {"datagen", "--config", smoke_cfg(), "--n",
                                     std::to_string(n), "--out", dir};
    if (!extra_seed.empty()) {
        args.push_back("--seed");
        args.push_back(extra_seed);
    }
    return cli(args);
}

}  // namespace

TEST_CASE("help exits zero, bad invocations exit one") {
    CHECK(cli({"--help"}) == 0);
    CHECK(cli({"datagen", "--help"}) == 0);
    MuteStderr mute;
    CHECK(cli({}) == 1);
    CHECK(cli({"frobnicate"}) == 1);
    CHECK(cli({"datagen", "--bogus"}) == 1);
    CHECK(cli({"eval"}) == 1);  // missing required flags
    CHECK(cli({"annotate", "--data", "x.jsonl", "--source", "nope"}) == 1);
    CHECK(cli({"eval", "--benchmark", "b.jsonl", "--checkpoint", "c.bin", "--mode",
               "vibes"}) == 1);
}

TEST_CASE("datagen is reproducible from seed and config") {
    test::TmpDir tmp("cli_datagen");
    REQUIRE(datagen_into(tmp / "a", 12) == 0);
    REQUIRE(datagen_into(tmp / "b", 12) == 0);

    for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json",
                          "resolved_config.json"})
        CHECK(test::slurp(tmp / (std::string("a/") + f)) ==
              test::slurp(tmp / (std::string("b/") + f)));
    CHECK(test::slurp(tmp / "a/images/train-000000.ppm") ==
          test::slurp(tmp / "b/images/train-000000.ppm"));
    CHECK(test::slurp(tmp / "a/depths/train-000000.pgm") ==
          test::slurp(tmp / "b/depths/train-000000.pgm"));

    REQUIRE(datagen_into(tmp / "c", 12, "8") == 0);
    CHECK(test::slurp(tmp / "a/train.jsonl") != test::slurp(tmp / "c/train.jsonl"));
}

TEST_CASE("config problems surface as exit one") {
    test::TmpDir tmp("cli_cfgerr");
    MuteStderr mute;
    CHECK(cli({"datagen", "--out", tmp / "x", "--set", "data.bogus=1"}) == 1);
    CHECK(cli({"datagen", "--out", tmp / "x", "--ratios", "0.5,0.5"}) == 1);
    CHECK(cli({"datagen", "--out", tmp / "x", "--ratios", "a,b,c"}) == 1);
    CHECK(cli({"datagen", "--out", tmp / "x", "--config", tmp / "missing.json"}) == 1);
}

TEST_CASE("the full chain runs to completion on the smoke config") {
    test::TmpDir tmp("cli_chain");
    std::string data = tmp / "data";
    REQUIRE(datagen_into(data, 20) == 0);  // 16/2/2 so every split is usable

    REQUIRE(cli({"pretrain-vlm", "--config", smoke_cfg(), "--data", data + "/train.jsonl",
                 "--out", tmp / "pv"}) == 0);
    std::string pv_ckpt = tmp / "pv/ckpt_pretrain_vlm_e0.bin";
    REQUIRE(fs::exists(pv_ckpt));
    CHECK(fs::exists(tmp / "pv/resolved_config.json"));
    CHECK(fs::exists(tmp / "pv/train_log.csv"));

    REQUIRE(cli({"train-stage1", "--config", smoke_cfg(), "--data", data + "/train.jsonl",
                 "--init", pv_ckpt, "--out", tmp / "s1"}) == 0);
    std::string s1_ckpt = tmp / "s1/ckpt_stage1_e0.bin";
    REQUIRE(fs::exists(s1_ckpt));
    CHECK(fs::exists(tmp / "s1/ckpt_pretrain_aligner_e0.bin"));

    REQUIRE(cli({"train-stage2", "--config", smoke_cfg(), "--data", data + "/train.jsonl",
                 "--init", s1_ckpt, "--out", tmp / "s2"}) == 0);
    REQUIRE(fs::exists(tmp / "s2/ckpt_stage2_e0.bin"));

    REQUIRE(cli({"bench-build", "--config", smoke_cfg(), "--data", data + "/test.jsonl",
                 "--out", tmp / "bb"}) == 0);
    REQUIRE(fs::exists(data + "/benchmark.jsonl"));
    CHECK(fs::exists(tmp / "bb/bench_report.json"));

    REQUIRE(cli({"eval", "--config", smoke_cfg(), "--benchmark", data + "/benchmark.jsonl",
                 "--checkpoint", s1_ckpt, "--out", tmp / "ev"}) == 0);
    CHECK(fs::exists(tmp / "ev/report.csv"));
    CHECK(fs::exists(tmp / "ev/report.txt"));

    CHECK(cli({"eval", "--config", smoke_cfg(), "--benchmark", data + "/benchmark.jsonl",
               "--checkpoint", s1_ckpt, "--out", tmp / "ev2", "--no-latents"}) == 0);
    CHECK(cli({"eval", "--config", smoke_cfg(), "--benchmark", data + "/benchmark.jsonl",
               "--checkpoint", s1_ckpt, "--out", tmp / "ev3", "--mode", "judge",
               "--judge-client", "mock", "--cache-dir", tmp / "jcache"}) == 0);

    REQUIRE(cli({"analyze-latents", "--config", smoke_cfg(), "--data", data + "/test.jsonl",
                 "--checkpoint", s1_ckpt, "--out", tmp / "al"}) == 0);
    for (const char* f : {"similarity.csv", "similarity.json", "similarity.ppm",
                          "latents.jsonl"})
        CHECK(fs::exists(tmp / (std::string("al/") + f)));

    // the exported latents cover the benchmark ids, so eval can import them
    CHECK(cli({"eval", "--config", smoke_cfg(), "--benchmark", data + "/benchmark.jsonl",
               "--checkpoint", s1_ckpt, "--out", tmp / "ev4", "--latents",
               tmp / "al/latents.jsonl"}) == 0);

    // train-split latents do not cover the benchmark: id lookup fails
    REQUIRE(cli({"analyze-latents", "--config", smoke_cfg(), "--data", data + "/train.jsonl",
                 "--checkpoint", s1_ckpt, "--out", tmp / "al2"}) == 0);
    MuteStderr mute;
    CHECK(cli({"eval", "--config", smoke_cfg(), "--benchmark", data + "/benchmark.jsonl",
               "--checkpoint", s1_ckpt, "--out", tmp / "ev5", "--latents",
               tmp / "al2/latents.jsonl"}) == 1);
}

TEST_CASE("annotate reruns from cache byte-identically and gates on quality") {
    test::TmpDir tmp("cli_annotate");
    std::string data = tmp / "data";
    REQUIRE(datagen_into(data, 12) == 0);

    std::vector<std::string> base = {"annotate", "--config", smoke_cfg(), "--data",
                                     data + "/train.jsonl", "--source", "synthetic",
                                     "--client", "mock", "--cache-dir", tmp / "cache"};
    auto with_out = [&](const std::string& out) {
        std::vector<std::string> args = base;
        args.push_back("--out");
        args.push_back(out);
        return args;
    };
    REQUIRE(cli(with_out(tmp / "an1")) == 0);
    REQUIRE(cli(with_out(tmp / "an2")) == 0);
    for (const char* f : {"annotated.jsonl", "quarantine.jsonl", "returned.jsonl"})
        CHECK(test::slurp(tmp / (std::string("an1/") + f)) ==
              test::slurp(tmp / (std::string("an2/") + f)));
    CHECK(fs::exists(tmp / "an1/annotate_report.json"));

    MuteStderr mute;
    std::vector<std::string> strict = with_out(tmp / "an3");
    strict.push_back("--min-delta");
    strict.push_back("1000");  // unreachable gain: the gate must halt the run
    CHECK(cli(strict) == 1);
    CHECK(cli({"annotate", "--config", smoke_cfg(), "--data", data + "/train.jsonl",
               "--source", "llava-cot", "--out", tmp / "an4"}) == 1);
}

TEST_CASE("bench-build guards against id collisions and overwrites") {
    test::TmpDir tmp("cli_bench");
    std::string data = tmp / "data";
    REQUIRE(datagen_into(data, 12) == 0);

    MuteStderr mute;
    // a poisoned dataset whose train split shares every test id
    fs::create_directories(tmp / "poison");
    fs::copy_file(data + "/test.jsonl", tmp / "poison/test.jsonl");
    fs::copy_file(data + "/test.jsonl", tmp / "poison/train.jsonl");
    CHECK(cli({"bench-build", "--config", smoke_cfg(), "--data", tmp / "poison/test.jsonl",
               "--out", tmp / "bb1"}) == 1);

    CHECK(cli({"bench-build", "--config", smoke_cfg(), "--data", data + "/test.jsonl",
               "--name", "test", "--out", tmp / "bb2"}) == 1);
}
