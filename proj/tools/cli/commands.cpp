#include "cli/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "cli/manifest.hpp"
#include "conse/conse.hpp"
#include "conse/embedding_store.hpp"
#include "conse/error.hpp"
#include "conse/eval.hpp"
#include "conse/hierarchy.hpp"
#include "conse/score_io.hpp"
#include "conse/synth.hpp"

namespace conse::cli {

namespace {

namespace fs = std::filesystem;

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("conse", sink);
  logger->set_pattern("[conse] [%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("CONSE_LOG"); env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
  }
  logger->set_level(level);
  return logger;
}

int exit_code_for(const Error& e) { return is_degenerate(e.code()) ? kDegenerateData : kInputError; }

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

fs::path manifest_path_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::optional<std::size_t> parse_hops(const std::string& s) {
  if (s == "inf" || s == "none") return std::nullopt;
  return static_cast<std::size_t>(std::stoull(s));
}

struct CatalogArgs {
  std::string embeddings;
  std::string labels;
  std::string splits;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--embeddings", embeddings, "Embedding text file")->required()->check(CLI::ExistingFile);
    cmd.add_option("--catalog", labels, "Label map TSV (id<TAB>syn1,syn2)")->required()->check(CLI::ExistingFile);
    cmd.add_option("--splits", splits, "Split file (id TRAIN|TEST)")->required()->check(CLI::ExistingFile);
  }

  void record(RunManifest& m) const {
    m.add_input("embeddings", embeddings);
    m.add_input("catalog", labels);
    m.add_input("splits", splits);
  }
};

struct EmbedArgs {
  CatalogArgs catalog;
  std::string scores;
  std::size_t t = 10;
  std::string out;
  std::string manifest;
};

int cmd_embed(const EmbedArgs& a, spdlog::logger& log) {
  RunManifest manifest("embed");
  a.catalog.record(manifest);
  manifest.add_input("scores", a.scores);
  manifest.set_config({{"T", a.t}});
  const fs::path manifest_path = a.manifest.empty() ? manifest_path_for(a.out) : fs::path(a.manifest);

  int status = kSuccess;
  try {
    const auto table = load_embeddings_file(a.catalog.embeddings);
    const auto catalog = load_catalog_files(a.catalog.labels, a.catalog.splits, table);
    for (const auto& ex : catalog.exclusions()) log.warn("label {} excluded: {}", ex.id, ex.reason);
    const LabelEmbeddings embeddings(catalog, table);
    const auto records = read_score_records_file(a.scores);
    log.info("embedding {} records with T={}", records.size(), a.t);

    auto out = open_output(a.out);
    for (const auto& r : records) {
      out << to_json(conse_embed(r, a.t, catalog.train_order(), embeddings)).dump() << '\n';
    }
    out.close();
    manifest.add_output("vectors", a.out);
  } catch (const Error& e) {
    log.error("{}", e.what());
    status = exit_code_for(e);
  }
  manifest.write(manifest_path, status);
  return status;
}

struct EvalArgs {
  CatalogArgs catalog;
  std::string scores;
  std::string hierarchy;
  std::size_t t = 10;
  std::string max_hops = "none";
  std::string mode = "TEST_ONLY";
  std::vector<std::size_t> ks{1, 2, 5, 10, 20};
  std::size_t threads = 0;
  std::string out;
  std::string table;
  std::string manifest;
};

int cmd_eval(const EvalArgs& a, std::ostream& stdout_stream, spdlog::logger& log) {
  RunManifest manifest("eval");
  a.catalog.record(manifest);
  manifest.add_input("scores", a.scores);
  if (!a.hierarchy.empty()) manifest.add_input("hierarchy", a.hierarchy);
  const fs::path manifest_path = a.manifest.empty() ? manifest_path_for(a.out) : fs::path(a.manifest);

  int status = kSuccess;
  try {
    EvalConfig config;
    config.t = a.t;
    config.ks = a.ks;
    config.threads = a.threads;
    config.candidate_mode = *parse_candidate_mode(a.mode);
    config.max_hops = parse_hops(a.max_hops);
    manifest.set_config({{"T", config.t},
                         {"candidate_mode", a.mode},
                         {"ks", config.ks},
                         {"max_hops", config.max_hops ? nlohmann::json(*config.max_hops) : nlohmann::json(nullptr)}});

    const auto table = load_embeddings_file(a.catalog.embeddings);
    const auto catalog = load_catalog_files(a.catalog.labels, a.catalog.splits, table);
    for (const auto& ex : catalog.exclusions()) log.warn("label {} excluded: {}", ex.id, ex.reason);
    const LabelEmbeddings embeddings(catalog, table);

    std::optional<LabelHierarchy> hierarchy;
    nlohmann::json disconnected = nlohmann::json::array();
    if (!a.hierarchy.empty()) {
      std::vector<LabelId> ids;
      for (const auto& l : catalog.labels()) ids.push_back(l.id);
      hierarchy = load_hierarchy_file(a.hierarchy, ids);
      disconnected = hierarchy->disconnected_labels(ids);
      if (!disconnected.empty()) log.warn("{} catalog labels are disconnected in the hierarchy", disconnected.size());
    }
    const auto records = read_score_records_file(a.scores);
    log.info("evaluating {} records", records.size());

    const EvalAssets assets{catalog, embeddings, hierarchy ? &*hierarchy : nullptr};
    const EvalReport report = evaluate_batch(records, assets, config);

    nlohmann::json j = to_json(report);
    j["label_exclusions"] = exclusion_report(catalog);
    j["disconnected_labels"] = disconnected;
    auto out = open_output(a.out);
    out << j.dump(2) << '\n';
    out.close();
    manifest.add_output("report", a.out);

    const std::string text = format_table(report);
    stdout_stream << text;
    if (!a.table.empty()) {
      auto t = open_output(a.table);
      t << text;
      t.close();
      manifest.add_output("table", a.table);
    }
  } catch (const Error& e) {
    log.error("{}", e.what());
    status = exit_code_for(e);
  }
  manifest.write(manifest_path, status);
  return status;
}

struct HopsArgs {
  std::string hierarchy;
  std::string splits;
  std::vector<std::string> max_hops{"2"};
  std::string out;
  std::string manifest;
};

int cmd_hops(const HopsArgs& a, std::ostream& stdout_stream, spdlog::logger& log) {
  RunManifest manifest("hops");
  manifest.add_input("hierarchy", a.hierarchy);
  manifest.add_input("splits", a.splits);
  manifest.set_config({{"max_hops", a.max_hops}});
  fs::path manifest_path = a.manifest;
  if (manifest_path.empty()) manifest_path = a.out.empty() ? fs::path("conse-hops.manifest.json") : manifest_path_for(a.out);

  int status = kSuccess;
  try {
    LabelSet train;
    LabelSet test;
    std::vector<LabelId> ids;
    for (const auto& [id, split] : read_splits_file(a.splits)) {
      (split == Split::Train ? train : test).insert(id);
      ids.push_back(id);
    }
    const auto h = load_hierarchy_file(a.hierarchy, ids);
    std::ostringstream listing;
    for (const auto& hops_text : a.max_hops) {
      const auto hops = parse_hops(hops_text);
      const LabelSet set = hop_candidate_set(h, train, test, hops.value_or(kUnboundedHops));
      listing << "max_hops=" << hops_text << " size=" << set.size() << "\n";
      bool first = true;
      for (LabelId id : set) {
        listing << (first ? "" : " ") << id;
        first = false;
      }
      listing << "\n";
      log.info("max_hops={} -> {} labels", hops_text, set.size());
    }
    if (a.out.empty()) {
      stdout_stream << listing.str();
    } else {
      auto out = open_output(a.out);
      out << listing.str();
      out.close();
      manifest.add_output("listing", a.out);
    }
  } catch (const Error& e) {
    log.error("{}", e.what());
    status = exit_code_for(e);
  }
  manifest.write(manifest_path, status);
  return status;
}

struct SynthArgs {
  synth::SynthConfig config;
  std::string preset;
  std::string out;
  std::string manifest;
};

int cmd_synth(const SynthArgs& a, spdlog::logger& log) {
  RunManifest manifest("synth");
  nlohmann::json config = synth::to_json(a.config);
  if (!a.preset.empty()) config = {{"preset", a.preset}};
  manifest.set_config(config);
  const fs::path manifest_path = a.manifest.empty() ? fs::path(a.out) / "run_manifest.json" : fs::path(a.manifest);

  int status = kSuccess;
  try {
    const auto bundle = a.preset == "liger" ? synth::liger_bundle() : synth::generate(a.config);
    synth::write_bundle(bundle, a.out);
    for (const char* name : {synth::files::kEmbeddings, synth::files::kLabels, synth::files::kSplits,
                             synth::files::kHierarchy, synth::files::kScores, synth::files::kMetadata}) {
      manifest.add_output(name, fs::path(a.out) / name);
    }
    log.info("wrote bundle with {} records to {}", bundle.records.size(), a.out);
  } catch (const Error& e) {
    log.error("{}", e.what());
    status = exit_code_for(e);
    fs::create_directories(a.out);
  }
  manifest.write(manifest_path, status);
  return status;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto logger = make_logger(err);

  CLI::App app{"ConSE zero-shot inference and evaluation", "conse"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "", "Read options from an INI/TOML config file; command-line flags win");
  app.require_subcommand(1);

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Write the ConSE vector of every score record as JSON lines");
  embed.catalog.add_to(*embed_cmd);
  embed_cmd->add_option("--scores", embed.scores, "Score JSON-lines file")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("-T,--T", embed.t, "Number of top classifier predictions to combine")
      ->check(CLI::PositiveNumber);
  embed_cmd->add_option("--out", embed.out, "Output JSON-lines path")->required();
  embed_cmd->add_option("--manifest", embed.manifest, "Run manifest path (default <out>.manifest.json)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compute flat hit@k and hierarchical precision@k");
  eval.catalog.add_to(*eval_cmd);
  eval_cmd->add_option("--scores", eval.scores, "Score JSON-lines file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--hierarchy", eval.hierarchy, "Hierarchy file (parent child)")->check(CLI::ExistingFile);
  eval_cmd->add_option("-T,--T", eval.t, "Number of top classifier predictions to combine")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--max-hops", eval.max_hops, "Restrict TEST candidates to this many hops of TRAIN (or 'none')");
  eval_cmd->add_option("--candidate-mode", eval.mode, "TEST_ONLY or PLUS_TRAIN")
      ->check(CLI::IsMember({"TEST_ONLY", "PLUS_TRAIN"}));
  eval_cmd->add_option("--ks", eval.ks, "Comma-separated k values")->delimiter(',')->check(CLI::PositiveNumber);
  eval_cmd->add_option("--threads", eval.threads, "Worker threads (0 = all cores)");
  eval_cmd->add_option("--out", eval.out, "JSON report path")->required();
  eval_cmd->add_option("--table", eval.table, "Also write the text table here");
  eval_cmd->add_option("--manifest", eval.manifest, "Run manifest path (default <out>.manifest.json)");

  HopsArgs hops;
  auto* hops_cmd = app.add_subcommand("hops", "List TEST labels within max hops of the TRAIN labels");
  hops_cmd->add_option("--hierarchy", hops.hierarchy, "Hierarchy file (parent child)")
      ->required()
      ->check(CLI::ExistingFile);
  hops_cmd->add_option("--splits", hops.splits, "Split file (id TRAIN|TEST)")->required()->check(CLI::ExistingFile);
  hops_cmd->add_option("--max-hops", hops.max_hops, "One or more hop bounds, comma separated ('inf' = unbounded)")
      ->delimiter(',');
  hops_cmd->add_option("--out", hops.out, "Listing path (default stdout)");
  hops_cmd->add_option("--manifest", hops.manifest, "Run manifest path");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic bundle with planted structure");
  synth_cmd->add_option("--out", syn.out, "Bundle directory")->required();
  synth_cmd->add_option("--seed", syn.config.seed, "Random seed");
  synth_cmd->add_option("--q", syn.config.q, "Embedding dimension");
  synth_cmd->add_option("--n0", syn.config.n0, "TRAIN label count");
  synth_cmd->add_option("--n1", syn.config.n1, "TEST label count");
  synth_cmd->add_option("--clusters", syn.config.clusters, "Cluster count");
  synth_cmd->add_option("--spread", syn.config.spread, "Max angle from cluster center, radians");
  synth_cmd->add_option("--noise", syn.config.noise, "Score noise mixing weight in [0,1]");
  synth_cmd->add_option("--plant-fraction", syn.config.plant_fraction, "Fraction of planted TEST labels");
  synth_cmd->add_option("--images-per-label", syn.config.images_per_label, "Score records per TEST label");
  synth_cmd->add_option("--preset", syn.preset, "Fixed construction instead of random generation")
      ->check(CLI::IsMember({"liger"}));
  synth_cmd->add_option("--manifest", syn.manifest, "Run manifest path (default <out>/run_manifest.json)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  }

  try {
    if (*embed_cmd) return cmd_embed(embed, *logger);
    if (*eval_cmd) {
      parse_hops(eval.max_hops);
      return cmd_eval(eval, out, *logger);
    }
    if (*hops_cmd) {
      for (const auto& h : hops.max_hops) parse_hops(h);
      return cmd_hops(hops, out, *logger);
    }
    if (*synth_cmd) return cmd_synth(syn, *logger);
  } catch (const std::invalid_argument&) {
    err << "max-hops must be a non-negative integer or 'inf'\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace conse::cli
