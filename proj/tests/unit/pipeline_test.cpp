#include "lidbench/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "lidbench/error.hpp"
#include "lidbench/hash.hpp"
#include "lidbench/report.hpp"

using namespace lidbench;
namespace fs = std::filesystem;

namespace {

nlohmann::json small_config() {
    std::ifstream in(fs::path(LIDBENCH_FIXTURE_DIR) / "small-mock.json");
    return nlohmann::json::parse(in);
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

class FailingTransport : public ChatTransport {
public:
    HttpResult post(const ChatRequest&) override { return {500, "", ""}; }
};

std::string expect_config_error(const nlohmann::json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    ADD_FAILURE() << "expected ConfigError for " << j.dump();
    return {};
}

}  // namespace

TEST(Config, DefaultsAndShortForms) {
    const auto c = parse_config(nlohmann::json::object());
    EXPECT_EQ(c.tasks.size(), 3u);
    EXPECT_EQ(c.node_count, 1000u);
    EXPECT_DOUBLE_EQ(c.density, 0.1);
    const auto d = parse_config({{"task", "similarity"}, {"encoding", "expert"}, {"quota", 4}});
    EXPECT_EQ(d.tasks, std::vector<TaskKind>{TaskKind::similarity});
    EXPECT_EQ(d.quota.at(TaskKind::similarity), 4u);
    const auto spec = d.corpus_spec(TaskKind::similarity, Encoding::expert);
    EXPECT_EQ(spec.per_cell, 4u);
    EXPECT_EQ(spec.thresholds, default_thresholds(Encoding::expert));
}

TEST(Config, ReportsEveryUnknownKey) {
    auto j = small_config();
    j["grpah"] = 1;
    j["backend"]["modle"] = "x";
    j["thresholds"]["incident"]["big_max"] = 3;
    const auto msg = expect_config_error(j);
    EXPECT_NE(msg.find("grpah"), std::string::npos);
    EXPECT_NE(msg.find("backend.modle"), std::string::npos);
    EXPECT_NE(msg.find("thresholds.incident.big_max"), std::string::npos);
}

TEST(Config, RejectsInvalidValues) {
    expect_config_error({{"quota", {{"similarity", 3}}}});
    expect_config_error({{"graph", {{"density", 1.5}}}});
    expect_config_error({{"backend", {{"temperature", 0.5}}}});
    expect_config_error({{"encodings", {"incident", "incident"}}});
    expect_config_error({{"tasks", {"sorting"}}});
    expect_config_error({{"thresholds", {{"expert", {{"small_max", 10}, {"medium_max", 5}}}}}});
    expect_config_error({{"backend", {{"kind", "live"}}}});
    EXPECT_NO_THROW(parse_config({{"backend", {{"temperature", 0.5}, {"non_paper_mode", true}}}}));
}

TEST(Config, NormalizedFormRoundTrips) {
    const auto c = parse_config(small_config());
    const auto j = to_json(c);
    EXPECT_EQ(to_json(parse_config(j)), j);
}

TEST(Pipeline, EndToEndWithMockBackend) {
    const auto dir = fresh_dir("lidbench-pipeline-e2e");
    Pipeline p(dir);
    p.generate(parse_config(small_config()));
    const auto stats = p.run();
    EXPECT_EQ(stats.cache_hits, 0u);
    EXPECT_EQ(stats.requests, 8u * 3 + 6u * 9 + 2u * 9);
    p.score();
    const auto fits = p.fit();
    ASSERT_EQ(fits.size(), 1u);
    p.report();
    EXPECT_TRUE(p.verify().empty());

    for (const char* f : {"config.json", "manifest.json", "corpus/similarity-incident.jsonl",
                          "responses/edge_existence-incident.jsonl", "scores/cells.csv", "fit/fit-incident.json",
                          "report/summary.json", "report/heatmap-common_connection-incident.svg",
                          "logs/requests.jsonl"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    const auto m = p.manifest();
    for (const char* stage : {"generate", "run", "score", "fit", "report"}) {
        EXPECT_TRUE(m["stages"].contains(stage)) << stage;
    }
    EXPECT_EQ(m["tokenizer"]["id"], "cl100k_base");
    EXPECT_EQ(m["rng"], std::string(Rng::kAlgorithm) + "/" + std::to_string(Rng::kVersion));

    // A second run is served entirely from the cache.
    Pipeline again(dir);
    const auto rerun = again.run();
    EXPECT_EQ(rerun.cache_hits, 8u * 3 + 6u * 9 + 2u * 9);
    EXPECT_EQ(rerun.requests, 0u);
    // Re-running a stage drops the stages after it.
    EXPECT_FALSE(again.manifest()["stages"].contains("score"));
    EXPECT_THROW(again.fit(), IoError);
    fs::remove_all(dir);
}

TEST(Pipeline, GenerateIsReproducible) {
    const auto a = fresh_dir("lidbench-pipeline-a");
    const auto b = fresh_dir("lidbench-pipeline-b");
    Pipeline(a).generate(parse_config(small_config()));
    Pipeline(b).generate(parse_config(small_config()));
    for (const auto& entry : fs::directory_iterator(a / "corpus")) {
        EXPECT_EQ(sha256_file(entry.path()), sha256_file(b / "corpus" / entry.path().filename()))
            << entry.path().filename();
    }
    EXPECT_EQ(Pipeline(a).manifest()["stages"]["generate"], Pipeline(b).manifest()["stages"]["generate"]);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Pipeline, DetectsTamperedArtifacts) {
    const auto dir = fresh_dir("lidbench-pipeline-tamper");
    auto cfg = small_config();
    cfg["tasks"] = {"edge_existence"};
    Pipeline p(dir);
    p.generate(parse_config(cfg));
    p.run();
    {
        std::ofstream out(dir / "corpus" / "edge_existence-incident.jsonl", std::ios::app);
        out << "\n";
    }
    const auto problems = p.verify();
    ASSERT_EQ(problems.size(), 1u);
    EXPECT_EQ(problems[0].path, "corpus/edge_existence-incident.jsonl");
    try {
        p.score();
        FAIL() << "expected HashMismatchError";
    } catch (const HashMismatchError& e) {
        EXPECT_EQ(exit_code_for(e), 2);
    }
    fs::remove(dir / "responses" / "edge_existence-incident.jsonl");
    EXPECT_EQ(p.verify().size(), 2u);
    fs::remove_all(dir);
}

TEST(Pipeline, StagesRequireTheirInputs) {
    const auto dir = fresh_dir("lidbench-pipeline-order");
    Pipeline p(dir);
    EXPECT_THROW(p.run(), IoError);
    auto cfg = small_config();
    cfg["tasks"] = {"edge_existence"};
    p.generate(parse_config(cfg));
    EXPECT_THROW(p.score(), IoError);
    fs::remove_all(dir);
}

TEST(Pipeline, LiveBackendNeedsItsKey) {
    const auto dir = fresh_dir("lidbench-pipeline-live");
    auto cfg = small_config();
    cfg["tasks"] = {"edge_existence"};
    cfg["backend"] = {{"kind", "live"},
                      {"endpoint", "http://127.0.0.1:1/v1/chat/completions"},
                      {"model", "m"},
                      {"api_key_env", "LIDBENCH_PIPELINE_UNSET_KEY"},
                      {"retry", {{"max_attempts", 1}}}};
    ::unsetenv("LIDBENCH_PIPELINE_UNSET_KEY");
    Pipeline p(dir);
    p.generate(parse_config(cfg));
    try {
        p.run();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("LIDBENCH_PIPELINE_UNSET_KEY"), std::string::npos);
        EXPECT_EQ(exit_code_for(e), 1);
    }
    try {
        p.run(std::make_shared<FailingTransport>());
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_EQ(exit_code_for(e), 3);
    }
    // Failed requests are recorded as errors and score as missing answers.
    p.score();
    std::ifstream in(dir / "scores" / "cells.jsonl");
    std::string line;
    while (std::getline(in, line)) EXPECT_DOUBLE_EQ(nlohmann::json::parse(line)["accuracy"].get<double>(), 0.0);
    fs::remove_all(dir);
}

TEST(Report, WritesTablesChartsAndManifest) {
    AccuracyCell a;
    a.task = TaskKind::common_connection;
    a.encoding = Encoding::expert;
    a.n = 10;
    a.correct = 7;
    a.accuracy = 70.0;
    a.stddev = 4.5;
    std::vector<AccuracyCell> cells;
    for (int p1 = 0; p1 < 3; ++p1) {
        for (int p2 = 3; p2 < 6; ++p2) {
            a.cell = std::to_string(p1) + "," + std::to_string(p2);
            a.rank = p1 * 3 + p2 - 3;
            a.mean_positions = {0.1 + 0.2 * p1, 0.5 + 0.2 * (p2 - 3)};
            cells.push_back(a);
        }
    }
    const auto svg = heatmap_svg(cells);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("70.00 \xC2\xB1 4.50"), std::string::npos);
    const auto csv = cells_csv(cells);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);

    const auto dir = fresh_dir("lidbench-report");
    const auto files = emit_report(cells, {}, {}, {{"tool", "test"}}, dir);
    EXPECT_TRUE(fs::exists(dir / "heatmap-common_connection-expert.svg"));
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    for (const auto& f : files) {
        if (f == "manifest.json") continue;
        EXPECT_EQ(manifest["files"][f], sha256_file(dir / f)) << f;
    }
    EXPECT_THROW(emit_report({}, {}, {}, {}, dir), ParameterError);
    fs::remove_all(dir);
}
