#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "conse/conse.hpp"
#include "conse/embedding_store.hpp"
#include "conse/eval.hpp"
#include "conse/hierarchy.hpp"

namespace conse::synth {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t q = 16;
  std::size_t n0 = 16;
  std::size_t n1 = 8;
  std::size_t clusters = 4;
  /// Maximum angle (radians) between a label and its cluster center; in (0, pi/2).
  double spread = 0.6;
  /// Weight in [0, 1] of a random simplex point mixed into each score vector.
  double noise = 0.0;
  /// Fraction of TEST labels planted between two TRAIN labels.
  double plant_fraction = 0.5;
  std::size_t images_per_label = 4;

  /// Throws InvalidArgument on out-of-range fields.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& config);

/// mt19937_64 with arithmetic-only transforms, so streams are identical on
/// every platform (std distributions are implementation defined).
class PortableRng {
 public:
  static constexpr const char* kName = "mt19937_64/uniform53/irwin-hall-12";

  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  /// Approximately standard normal (sum of 12 uniforms minus 6).
  double normal();

 private:
  std::mt19937_64 engine_;
};

struct PlantedLabel {
  LabelId test_label = 0;
  LabelId first = 0;
  LabelId second = 0;
  /// Weight on `first`; score mass is split (lambda, 1 - lambda).
  double lambda = 0.5;
};

/// In-memory bundle; its text serializations are the on-disk files.
struct SynthBundle {
  SynthConfig config;
  std::size_t q = 0;
  std::vector<std::pair<std::string, std::vector<double>>> embeddings;
  std::vector<Label> labels;
  std::vector<std::pair<LabelId, LabelId>> edges;
  std::vector<ScoreRecord> records;
  std::vector<PlantedLabel> planted;
};

SynthBundle generate(const SynthConfig& config);

/// Unit vector along lambda * a + (1 - lambda) * b.
std::vector<double> plant_between(std::span<const double> a, std::span<const double> b, double lambda);

/// Two orthogonal TRAIN labels (lion, tiger), a TEST label planted at their
/// midpoint (liger), one unplanted TEST decoy, and one image with scores
/// (0.5, 0.5).
SynthBundle liger_bundle();

/// Bundle file contents keyed by file name.
std::map<std::string, std::string> serialize(const SynthBundle& bundle);
void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir);

namespace files {
inline constexpr const char* kEmbeddings = "embeddings.txt";
inline constexpr const char* kLabels = "labels.tsv";
inline constexpr const char* kSplits = "splits.txt";
inline constexpr const char* kHierarchy = "hierarchy.txt";
inline constexpr const char* kScores = "scores.jsonl";
inline constexpr const char* kMetadata = "metadata.json";
}  // namespace files

/// Parsed bundle assets.
struct LoadedBundle {
  EmbeddingTable table;
  LabelCatalog catalog;
  LabelEmbeddings embeddings;
  LabelHierarchy hierarchy;
  std::vector<ScoreRecord> records;
  nlohmann::json metadata;
};

LoadedBundle load_bundle(const std::filesystem::path& dir);
/// Parses serialize(bundle) without touching the filesystem.
LoadedBundle materialize(const SynthBundle& bundle);

/// Reference ConSE vector: full sort, long double accumulation, means
/// recomputed from the raw table.
ConseVector oracle_conse_vector(const LoadedBundle& bundle, const std::string& image_id, std::size_t t);

/// Reference ranking: exhaustive cosine scan over every candidate synonym.
RankedPrediction oracle_conse(const LoadedBundle& bundle, const std::string& image_id, std::size_t t,
                              CandidateMode mode);
RankedPrediction oracle_conse(const LoadedBundle& bundle, const ScoreRecord& record, std::size_t t,
                              CandidateMode mode);
ConseVector oracle_conse_vector(const LoadedBundle& bundle, const ScoreRecord& record, std::size_t t);

}  // namespace conse::synth
