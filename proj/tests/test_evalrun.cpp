#include <filesystem>

#include "doctest.h"
#include "ssr/databuild.hpp"
#include "ssr/evalrun.hpp"
#include "ssr/image_io.hpp"
#include "support.hpp"

using namespace ssr;

namespace {

RunConfig eval_cfg() {
    RunConfig cfg;
    cfg.seed = 23;
    cfg.d_enc = 6;
    cfg.d_midi = 8;
    cfg.d_vlm = 8;
    cfg.latent_tokens = 3;
    cfg.enc_patch = 16;
    cfg.enc_blocks = 1;
    cfg.enc_mixer = "mlp";
    cfg.midi_blocks = 1;
    cfg.vlm_patch = 32;
    cfg.vlm_blocks = 1;
    cfg.vlm_mixer = "scan";
    cfg.mlp_mult = 2;
    cfg.aligner_blocks = 1;
    return cfg;
}

std::vector<BenchRecord> labeled_fixture(const RunConfig& cfg, int n) {
    std::vector<BenchRecord> out;
    for (int i = 0; i < n; ++i) {
        BenchRecord r;
        r.sample = build_sample(cfg, cfg.seed, "bench", i);
        r.category = "spatial";
        r.subtask = "count";
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

TEST_CASE("eval mode names resolve") {
    CHECK(eval_mode_from_name("exact") == EvalMode::exact);
    CHECK(eval_mode_from_name("judge") == EvalMode::judge);
    CHECK_THROWS_AS(eval_mode_from_name("fuzzy"), ValidationError);
}

TEST_CASE("report aggregates follow the hand tally") {
    BenchReport r;
    r.tasks[{"general", "existence"}] = TaskStat{2, 1, 9.0};
    r.tasks[{"spatial", "count"}] = TaskStat{2, 2, 10.0};
    r.n_total = 4;
    r.correct_total = 3;
    r.score_total = 19.0;

    CHECK(r.overall_accuracy() == doctest::Approx(75.0));
    CHECK(r.average_accuracy() == doctest::Approx(75.0));  // (50 + 100) / 2
    CHECK(r.sum_accuracy() == doctest::Approx(150.0));
    CHECK(r.mean_score() == doctest::Approx(4.75));
    CHECK(r.tasks.at({"general", "existence"}).accuracy() == doctest::Approx(50.0));
    CHECK(r.tasks.at({"general", "existence"}).mean_score() == doctest::Approx(4.5));

    BenchReport empty;
    CHECK(empty.overall_accuracy() == 0.0);
    CHECK(empty.average_accuracy() == 0.0);
    CHECK(empty.sum_accuracy() == 0.0);
    CHECK(empty.mean_score() == 0.0);
}

TEST_CASE("report csv renders the frozen layout") {
    BenchReport r;
    r.tasks[{"general", "existence"}] = TaskStat{2, 1, 9.0};
    r.tasks[{"spatial", "count"}] = TaskStat{2, 2, 10.0};
    r.n_total = 4;
    r.correct_total = 3;
    r.score_total = 19.0;

    std::string want =
        "category,subtask,n,accuracy,mean_score\n"
        "general,existence,2,50.0000,4.5000\n"
        "spatial,count,2,100.0000,5.0000\n"
        "all,micro,4,75.0000,4.7500\n"
        "all,average,2,75.0000,\n"
        "all,summation,2,150.0000,\n";
    CHECK(report_csv(r) == want);

    std::string table = report_table(r);
    CHECK(table.find("category") != std::string::npos);
    CHECK(table.find("existence") != std::string::npos);
    CHECK(table.find("micro") != std::string::npos);
    CHECK(table.find("150.00") != std::string::npos);
}

TEST_CASE("write_report produces csv and table files deterministically") {
    test::TmpDir tmp("evalrep");
    BenchReport r;
    r.tasks[{"spatial", "count"}] = TaskStat{1, 1, 5.0};
    r.n_total = 1;
    r.correct_total = 1;
    r.score_total = 5.0;

    std::string path = tmp / "report.csv";
    write_report(path, r);
    CHECK(test::slurp(path) == report_csv(r));
    CHECK(test::slurp(tmp / "report.txt") == report_table(r));

    std::string first = test::slurp(path);
    write_report(path, r);
    CHECK(test::slurp(path) == first);

    // a .txt report path cannot clobber its own table
    write_report(tmp / "plain.txt", r);
    CHECK(std::filesystem::exists(tmp / "plain.txt.table.txt"));
}

TEST_CASE("generated answers are deterministic and respect max_new") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    Sample s = build_sample(cfg, cfg.seed, "bench", 0);

    std::string a1 = generate_answer(m, s, true, 8);
    std::string a2 = generate_answer(m, s, true, 8);
    CHECK(a1 == a2);
    std::string bare = generate_answer(m, s, false, 8);
    CHECK(bare == generate_answer(m, s, false, 8));
}

TEST_CASE("exact mode tallies string equality against the gold answer") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs = labeled_fixture(cfg, 4);
    recs[1].category = "general";
    recs[1].subtask = "existence";

    EvalOptions opt;
    opt.max_new = 4;
    // pin gold answers to the model's own outputs so the tally is known
    for (size_t i = 0; i < recs.size(); ++i) {
        std::string gen = generate_answer(m, recs[i].sample, true, opt.max_new);
        recs[i].sample.answer = (i % 2 == 0) ? gen : gen + " offby";
    }

    std::vector<EvalRow> rows;
    BenchReport rep = run_benchmark(m, recs, opt, &rows);
    CHECK(rep.n_total == 4);
    CHECK(rep.correct_total == 2);
    CHECK(rep.overall_accuracy() == doctest::Approx(50.0));
    CHECK(rep.mean_score() == doctest::Approx(2.5));  // hits score 5, misses 0
    CHECK(rep.tasks.size() == 2);
    CHECK(rep.tasks.at({"spatial", "count"}).n == 3);
    CHECK(rep.tasks.at({"general", "existence"}).n == 1);

    REQUIRE(rows.size() == 4);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].id == recs[i].sample.id);
        CHECK(rows[i].correct == (i % 2 == 0));
        CHECK(rows[i].response == generate_answer(m, recs[i].sample, true, opt.max_new));
    }
}

TEST_CASE("judge mode accuracy is exactly the fraction of yes verdicts") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs = labeled_fixture(cfg, 6);
    recs[2].category = "general";
    recs[2].subtask = "existence";
    recs[3].subtask = "relative position recognition";
    recs[4].subtask = "relative position recognition";
    recs[5].subtask = "relative position recognition";
    // markers in the gold answer steer the scripted judge
    const char* marks[] = {"yes-a", "no-b", "yes-c", "yes-d", "no-e", "no-f"};
    for (size_t i = 0; i < recs.size(); ++i) recs[i].sample.answer = marks[i];

    ScriptedClient sj("sc-judge", [](const ClientRequest& req) {
        if (req.prompt.find("Correct Answer: yes-") != std::string::npos)
            return std::string("{'pred': 'yes', 'score': 5}");
        return std::string("{'pred': 'no', 'score': 1}");
    });
    EvalOptions opt;
    opt.mode = EvalMode::judge;
    opt.judge_client = &sj;
    opt.max_new = 4;

    std::vector<EvalRow> rows;
    BenchReport rep = run_benchmark(m, recs, opt, &rows);
    CHECK(rep.n_total == 6);
    CHECK(rep.correct_total == 3);
    CHECK(rep.overall_accuracy() == doctest::Approx(50.0));
    CHECK(rep.mean_score() == doctest::Approx(3.0));  // (5+1+5+5+1+1)/6

    int yes = 0;
    for (const EvalRow& row : rows) yes += row.correct ? 1 : 0;
    CHECK(100.0 * yes / double(rows.size()) == rep.overall_accuracy());

    CHECK(rep.tasks.at({"spatial", "count"}).accuracy() == doctest::Approx(50.0));
    CHECK(rep.tasks.at({"general", "existence"}).accuracy() == doctest::Approx(100.0));
    CHECK(rep.tasks.at({"spatial", "relative position recognition"}).accuracy() ==
          doctest::Approx(100.0 / 3.0));
    CHECK(rep.average_accuracy() == doctest::Approx((50.0 + 100.0 + 100.0 / 3.0) / 3.0));
    CHECK(rep.sum_accuracy() == doctest::Approx(50.0 + 100.0 + 100.0 / 3.0));
}

TEST_CASE("judge replies are cached so replays ask nothing") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs = labeled_fixture(cfg, 3);
    for (auto& r : recs) r.sample.answer = "yes-cache";

    test::TmpDir tmp("evaljcache");
    ResponseCache cache(tmp.str());
    ScriptedClient sj("sc-judge", [](const ClientRequest&) {
        return std::string("{'pred': 'yes', 'score': 4}");
    });
    EvalOptions opt;
    opt.mode = EvalMode::judge;
    opt.judge_client = &sj;
    opt.cache = &cache;
    opt.max_new = 4;

    BenchReport first = run_benchmark(m, recs, opt);
    CHECK(sj.calls() == 3);
    BenchReport again = run_benchmark(m, recs, opt);
    CHECK(sj.calls() == 3);
    CHECK(report_csv(first) == report_csv(again));
}

TEST_CASE("worker count does not change the report") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs = labeled_fixture(cfg, 5);

    EvalOptions opt;
    opt.max_new = 4;
    opt.parallelism = 1;
    std::vector<EvalRow> rows1, rows3;
    BenchReport r1 = run_benchmark(m, recs, opt, &rows1);
    opt.parallelism = 3;
    BenchReport r3 = run_benchmark(m, recs, opt, &rows3);

    CHECK(report_csv(r1) == report_csv(r3));
    REQUIRE(rows1.size() == rows3.size());
    for (size_t i = 0; i < rows1.size(); ++i) {
        CHECK(rows1[i].id == rows3[i].id);
        CHECK(rows1[i].response == rows3[i].response);
    }
}

TEST_CASE("run_benchmark validates its inputs") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs = labeled_fixture(cfg, 1);

    EvalOptions opt;
    opt.parallelism = 0;
    CHECK_THROWS_AS(run_benchmark(m, recs, opt), ValidationError);
    opt.parallelism = 1;
    opt.max_new = 0;
    CHECK_THROWS_AS(run_benchmark(m, recs, opt), ValidationError);
    opt.max_new = 4;
    opt.mode = EvalMode::judge;  // judge mode without a client
    CHECK_THROWS_AS(run_benchmark(m, recs, opt), ValidationError);

    opt.mode = EvalMode::exact;
    recs[0].category.clear();
    CHECK_THROWS_AS(run_benchmark(m, recs, opt), ValidationError);
}

TEST_CASE("latents survive the file round trip exactly") {
    test::TmpDir tmp("latfile");
    Mat a(2, 3);
    a.a = {0.1, -2.5, 1.0 / 3.0, 1e-17, 4.0, -0.0};
    Mat b(2, 3);
    b.a = {1, 2, 3, 4, 5, 6};
    std::string path = tmp / "latents.jsonl";
    write_latents_file(path, {{"s-a", a}, {"s-b", b}});

    auto back = read_latents_file(path);
    REQUIRE(back.size() == 2);
    CHECK(back.at("s-a").rows == 2);
    CHECK(back.at("s-a").cols == 3);
    CHECK(back.at("s-a").a == a.a);  // bitwise through the json double codec
    CHECK(back.at("s-b").a == b.a);

    write_latents_file(path, {{"dup", a}, {"dup", b}});
    CHECK_THROWS_AS(read_latents_file(path), ValidationError);
    write_file_atomic(path, "{\"id\":\"x\",\"rows\":2,\"cols\":3,\"data\":[1,2]}\n");
    CHECK_THROWS_AS(read_latents_file(path), ValidationError);
    write_file_atomic(path, "not json\n");
    CHECK_THROWS_AS(read_latents_file(path), ValidationError);
}

TEST_CASE("a latents file can stand in for the reasoner") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs = labeled_fixture(cfg, 3);

    test::TmpDir tmp("latinject");
    std::string path = tmp / "latents.jsonl";
    std::vector<std::pair<std::string, Mat>> entries;
    for (const BenchRecord& r : recs) entries.emplace_back(r.sample.id, m.latents_value(r.sample));
    write_latents_file(path, entries);
    auto table = read_latents_file(path);

    EvalOptions opt;
    opt.max_new = 4;
    std::vector<EvalRow> native, imported;
    run_benchmark(m, recs, opt, &native);
    opt.latents_file = &table;
    run_benchmark(m, recs, opt, &imported);
    REQUIRE(native.size() == imported.size());
    for (size_t i = 0; i < native.size(); ++i)
        CHECK(native[i].response == imported[i].response);

    // a table missing one id is rejected
    table.erase(recs[1].sample.id);
    CHECK_THROWS_AS(run_benchmark(m, recs, opt), ValidationError);
    // as is a wrong-shaped entry
    table = read_latents_file(path);
    table.at(recs[0].sample.id) = Mat(1, 2);
    CHECK_THROWS_AS(run_benchmark(m, recs, opt), ValidationError);
}

TEST_CASE("empty benchmark yields an empty but well formed report") {
    RunConfig cfg = eval_cfg();
    SsrModel m(cfg, Tokenizer::synthetic_default());
    std::vector<BenchRecord> recs;
    EvalOptions opt;
    BenchReport rep = run_benchmark(m, recs, opt);
    CHECK(rep.n_total == 0);
    CHECK(rep.tasks.empty());
    CHECK(report_csv(rep).starts_with("category,subtask,n,accuracy,mean_score\n"));
}
