#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli/commands.hpp"
#include "cli/manifest.hpp"
#include "conse/synth.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace conse;

namespace {

const fs::path kFixtures = CONSE_FIXTURE_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "conse");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("conse_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
  return out;
}

std::vector<std::string> bundle_flags(const fs::path& dir) {
  return {"--embeddings", (dir / "embeddings.txt").string(), "--catalog", (dir / "labels.tsv").string(),
          "--splits",     (dir / "splits.txt").string(),     "--scores",  (dir / "scores.jsonl").string()};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

fs::path make_bundle(const std::string& name, const std::vector<std::string>& extra) {
  const auto dir = scratch(name) / "bundle";
  const auto r = run(concat({"synth", "--out", dir.string()}, extra));
  REQUIRE(r.code == 0);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("embed: liger fixture end to end") {
  const auto dir = scratch("embed_liger");
  const auto out = dir / "vectors.jsonl";
  const auto r = run(concat(concat({"embed"}, bundle_flags(kFixtures / "liger")), {"-T", "2", "--out", out.string()}));
  REQUIRE(r.code == 0);
  const auto lines = read_jsonl(out);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0]["image_id"] == "liger_0");
  CHECK(lines[0]["vector"][0].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(lines[0]["direction"][0].get<double>() - 0.7071) <= 1e-4);
  CHECK(std::abs(lines[0]["direction"][1].get<double>() - 0.7071) <= 1e-4);
  CHECK(lines[0]["norm"].get<double>() == doctest::Approx(std::sqrt(0.5)));
  CHECK(lines[0]["support"].size() == 2);
  CHECK(fs::exists(dir / "vectors.jsonl.manifest.json"));
}

TEST_CASE("embed: empty score file gives empty output") {
  const auto dir = scratch("embed_empty");
  std::ofstream(dir / "scores.jsonl").close();
  const auto f = kFixtures / "liger";
  const auto r = run({"embed", "--embeddings", (f / "embeddings.txt").string(), "--catalog",
                      (f / "labels.tsv").string(), "--splits", (f / "splits.txt").string(), "--scores",
                      (dir / "scores.jsonl").string(), "--out", (dir / "out.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "out.jsonl"));
  CHECK(slurp(dir / "out.jsonl").empty());
}

TEST_CASE("embed: synthetic bundle matches the oracle per image") {
  const auto dir = make_bundle("embed_oracle", {"--seed", "8", "--noise", "0.3"});
  const auto out = dir.parent_path() / "vectors.jsonl";
  REQUIRE(run(concat(concat({"embed"}, bundle_flags(dir)), {"--T", "3", "--out", out.string()})).code == 0);
  const auto bundle = synth::load_bundle(dir);
  const auto lines = read_jsonl(out);
  REQUIRE(lines.size() == bundle.records.size());
  for (const auto& line : lines) {
    const auto want = synth::oracle_conse_vector(bundle, line["image_id"].get<std::string>(), 3);
    const auto got = line["vector"].get<std::vector<double>>();
    REQUIRE(got.size() == want.vector.size());
    for (std::size_t d = 0; d < got.size(); ++d) CHECK(std::abs(got[d] - want.vector[d]) <= 1e-9);
  }
}

TEST_CASE("eval: fully planted bundle scores 100% hit@1 with Table-1 columns") {
  const auto dir = make_bundle("eval_planted", {"--seed", "3", "--plant-fraction", "1.0"});
  const auto report = dir.parent_path() / "report.json";
  const auto table = dir.parent_path() / "report.txt";
  const auto r = run(concat(concat({"eval"}, bundle_flags(dir)),
                            {"--hierarchy", (dir / "hierarchy.txt").string(), "-T", "2", "--out", report.string(),
                             "--table", table.string()}));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(report));
  CHECK(j["flat_hit_at_k_percent"]["1"] == 100.0);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j["flat_hit_at_k_percent"].items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end(), [](auto& a, auto& b) { return std::stoi(a) < std::stoi(b); });
  CHECK(keys == std::vector<std::string>{"1", "2", "5", "10", "20"});
  CHECK(r.out == slurp(table));
  CHECK(r.out.find("100.0") != std::string::npos);
  CHECK(j["label_exclusions"]["excluded"].empty());
  CHECK(j["disconnected_labels"].empty());
}

TEST_CASE("eval: PLUS_TRAIN does not beat TEST_ONLY") {
  const auto dir = make_bundle("eval_modes", {"--seed", "12", "--noise", "0.2", "--plant-fraction", "0.5"});
  const auto base = concat({"eval"}, bundle_flags(dir));
  const auto a = dir.parent_path() / "a.json";
  const auto b = dir.parent_path() / "b.json";
  REQUIRE(run(concat(base, {"--candidate-mode", "TEST_ONLY", "--out", a.string()})).code == 0);
  REQUIRE(run(concat(base, {"--candidate-mode", "PLUS_TRAIN", "--out", b.string()})).code == 0);
  const auto ja = nlohmann::json::parse(slurp(a));
  const auto jb = nlohmann::json::parse(slurp(b));
  for (const auto& [k, v] : ja["flat_hit_at_k_percent"].items()) {
    CHECK(jb["flat_hit_at_k_percent"][k].get<double>() <= v.get<double>());
  }
  CHECK(jb["config"]["candidate_mode"] == "PLUS_TRAIN");
}

TEST_CASE("eval: custom ks, max hops, and threads") {
  const auto dir = make_bundle("eval_flags", {"--seed", "2", "--n1", "12"});
  const auto out = dir.parent_path() / "r.json";
  const auto r = run(concat(concat({"eval"}, bundle_flags(dir)),
                            {"--hierarchy", (dir / "hierarchy.txt").string(), "--ks", "1,3", "--max-hops", "1",
                             "--threads", "2", "--out", out.string()}));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["config"]["ks"] == nlohmann::json::array({1, 3}));
  CHECK(j["config"]["max_hops"] == 1);
  CHECK(j["evaluated"].get<int>() + j["skipped"].get<int>() == j["total"].get<int>());
}

TEST_CASE("hops: fixtures and the nesting audit") {
  const auto dir = scratch("hops");
  std::ofstream(dir / "path_splits.txt") << "0 TRAIN\n1 TEST\n2 TEST\n3 TEST\n";
  auto r = run({"hops", "--hierarchy", (kFixtures / "path_hierarchy.txt").string(), "--splits",
                (dir / "path_splits.txt").string(), "--max-hops", "2", "--manifest", (dir / "m.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == "max_hops=2 size=2\n1 2\n");

  std::ofstream(dir / "star_splits.txt") << "0 TRAIN\n1 TEST\n2 TEST\n3 TEST\n4 TEST\n5 TEST\n";
  r = run({"hops", "--hierarchy", (kFixtures / "star_hierarchy.txt").string(), "--splits",
           (dir / "star_splits.txt").string(), "--max-hops", "1", "--out", (dir / "star.txt").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "star.txt") == "max_hops=1 size=5\n1 2 3 4 5\n");
  CHECK(fs::exists(dir / "star.txt.manifest.json"));

  r = run({"hops", "--hierarchy", (kFixtures / "path_hierarchy.txt").string(), "--splits",
           (dir / "path_splits.txt").string(), "--max-hops", "1,2,inf", "--manifest", (dir / "m.json").string()});
  CHECK(r.out == "max_hops=1 size=1\n1\nmax_hops=2 size=2\n1 2\nmax_hops=inf size=3\n1 2 3\n");
}

TEST_CASE("hops: random tree matches the literal definition") {
  const auto dir = scratch("hops_random");
  std::mt19937_64 rng(41);
  const std::size_t n = 120;
  const auto edges = conse::testing::random_tree(n, rng);
  {
    std::ofstream h(dir / "h.txt");
    for (const auto& [a, b] : edges) h << a << ' ' << b << '\n';
  }
  std::set<LabelId> train, test;
  {
    std::ofstream s(dir / "s.txt");
    for (LabelId i = 0; i < static_cast<LabelId>(n); ++i) {
      const bool is_train = rng() % 6 == 0;
      (is_train ? train : test).insert(i);
      s << i << (is_train ? " TRAIN\n" : " TEST\n");
    }
  }
  const auto r = run({"hops", "--hierarchy", (dir / "h.txt").string(), "--splits", (dir / "s.txt").string(),
                      "--max-hops", "2", "--manifest", (dir / "m.json").string()});
  REQUIRE(r.code == 0);
  const auto want = conse::testing::hop_set_oracle(conse::testing::all_pairs_hops(n, edges), train, test, 2);
  std::ostringstream expected;
  expected << "max_hops=2 size=" << want.size() << "\n";
  bool first = true;
  for (LabelId id : want) {
    expected << (first ? "" : " ") << id;
    first = false;
  }
  expected << "\n";
  CHECK(r.out == expected.str());
}

TEST_CASE("synth: deterministic bundles and the liger preset") {
  const auto a = make_bundle("synth_a", {"--seed", "99", "--noise", "0.1"});
  const auto b = make_bundle("synth_b", {"--seed", "99", "--noise", "0.1"});
  for (const char* f : {"embeddings.txt", "labels.tsv", "splits.txt", "hierarchy.txt", "scores.jsonl", "metadata.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto ma = nlohmann::json::parse(slurp(a / "run_manifest.json"));
  const auto mb = nlohmann::json::parse(slurp(b / "run_manifest.json"));
  CHECK(ma["config_hash"] == mb["config_hash"]);
  for (const auto& [name, entry] : ma["outputs"].items()) {
    CHECK(entry["fnv1a64"] == mb["outputs"][name]["fnv1a64"]);
  }

  const auto liger = make_bundle("synth_liger", {"--preset", "liger"});
  for (const char* f : {"embeddings.txt", "labels.tsv", "splits.txt", "hierarchy.txt", "scores.jsonl"}) {
    CHECK(slurp(liger / f) == slurp(kFixtures / "liger" / f));
  }
}

TEST_CASE("manifest: config hash is stable under re-serialization") {
  const auto dir = make_bundle("manifest", {"--seed", "5"});
  const auto m = nlohmann::json::parse(slurp(dir / "run_manifest.json"));
  CHECK(m["tool"] == "conse");
  CHECK(m["tool_version"] == cli::kToolVersion);
  CHECK(m["command"] == "synth");
  CHECK(m["exit_status"] == 0);
  const auto reparsed = nlohmann::json::parse(m["config"].dump(4));
  CHECK(cli::fnv1a64_hex(reparsed.dump()) == m["config_hash"].get<std::string>());
  CHECK(m["outputs"]["scores.jsonl"]["fnv1a64"] == cli::file_digest(dir / "scores.jsonl"));
  CHECK(cli::fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(cli::fnv1a64_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  const auto f = kFixtures / "liger";
  // Missing input file.
  CHECK(run({"embed", "--embeddings", (dir / "nope.txt").string(), "--catalog", (f / "labels.tsv").string(),
             "--splits", (f / "splits.txt").string(), "--scores", (f / "scores.jsonl").string(), "--out",
             (dir / "o.jsonl").string()})
            .code == cli::kInputError);
  // Malformed embeddings.
  std::ofstream(dir / "bad.txt") << "1 2\nlion 0 0\n";
  const auto bad = run({"embed", "--embeddings", (dir / "bad.txt").string(), "--catalog", (f / "labels.tsv").string(),
                        "--splits", (f / "splits.txt").string(), "--scores", (f / "scores.jsonl").string(), "--out",
                        (dir / "o.jsonl").string()});
  CHECK(bad.code == cli::kInputError);
  CHECK(bad.err.find("ZeroVector") != std::string::npos);
  const auto m = nlohmann::json::parse(slurp(dir / "o.jsonl.manifest.json"));
  CHECK(m["exit_status"] == cli::kInputError);
  // Invalid distribution in embed.
  std::ofstream(dir / "s.jsonl") << R"({"image_id":"x","scores":[0.9,0.9],"true_label":2})" << "\n";
  CHECK(run({"embed", "--embeddings", (f / "embeddings.txt").string(), "--catalog", (f / "labels.tsv").string(),
             "--splits", (f / "splits.txt").string(), "--scores", (dir / "s.jsonl").string(), "--out",
             (dir / "o.jsonl").string()})
            .code == cli::kInputError);
  // No TEST labels: empty candidate set is degenerate data.
  std::ofstream(dir / "all_train.txt") << "0 TRAIN\n1 TRAIN\n2 TRAIN\n3 TRAIN\n";
  std::ofstream(dir / "s4.jsonl") << R"({"image_id":"x","scores":[0.25,0.25,0.25,0.25],"true_label":2})" << "\n";
  CHECK(run({"eval", "--embeddings", (f / "embeddings.txt").string(), "--catalog", (f / "labels.tsv").string(),
             "--splits", (dir / "all_train.txt").string(), "--scores", (dir / "s4.jsonl").string(), "--out",
             (dir / "r.json").string()})
            .code == cli::kDegenerateData);
  // Unknown subcommand, bad mode, bad hops.
  CHECK(run({"frobnicate"}).code == cli::kInputError);
  CHECK(run(concat(concat({"eval"}, bundle_flags(f)), {"--candidate-mode", "BOTH", "--out", "x.json"})).code ==
        cli::kInputError);
  CHECK(run(concat(concat({"eval"}, bundle_flags(f)), {"--max-hops", "two", "--out", (dir / "x.json").string()}))
            .code == cli::kInputError);
  CHECK(run({"synth", "--out", (dir / "b").string(), "--spread", "3"}).code == cli::kInputError);
  CHECK(run({"--help"}).code == cli::kSuccess);
}

TEST_CASE("config file supplies options and flags win") {
  const auto dir = make_bundle("config", {"--seed", "4"});
  const auto cfg = dir.parent_path() / "run.ini";
  std::ofstream(cfg) << "[eval]\nT=1\ncandidate-mode=PLUS_TRAIN\n";
  const auto out = dir.parent_path() / "r.json";
  REQUIRE(run(concat(concat({"--config", cfg.string(), "eval"}, bundle_flags(dir)), {"--out", out.string()})).code == 0);
  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["config"]["T"] == 1);
  CHECK(j["config"]["candidate_mode"] == "PLUS_TRAIN");
  REQUIRE(run(concat(concat({"--config", cfg.string(), "eval"}, bundle_flags(dir)), {"-T", "3", "--out", out.string()}))
              .code == 0);
  j = nlohmann::json::parse(slurp(out));
  CHECK(j["config"]["T"] == 3);
}

TEST_CASE("CONSE_LOG controls verbosity") {
  const auto dir = make_bundle("log", {"--seed", "6"});
  const auto out = dir.parent_path() / "v.jsonl";
  setenv("CONSE_LOG", "info", 1);
  const auto loud = run(concat(concat({"embed"}, bundle_flags(dir)), {"--out", out.string()}));
  unsetenv("CONSE_LOG");
  const auto quiet = run(concat(concat({"embed"}, bundle_flags(dir)), {"--out", out.string()}));
  CHECK(loud.err.find("[info]") != std::string::npos);
  CHECK(quiet.err.find("[info]") == std::string::npos);
}

}  // TEST_SUITE
