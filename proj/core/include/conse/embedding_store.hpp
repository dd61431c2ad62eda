#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "conse/types.hpp"

namespace conse {

/// Immutable term -> unit-norm vector map. Every stored vector has L2 norm 1
/// (to within rounding) and the same dimension.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Builds a table from raw (term, vector) pairs, renormalizing every vector.
  /// Applies the same validation as the text loader.
  static EmbeddingTable from_vectors(std::size_t dimension,
                                     std::vector<std::pair<std::string, std::vector<double>>> entries);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return terms_.size(); }
  bool contains(std::string_view term) const { return index_.contains(std::string(term)); }

  /// Returns nullopt when the term is absent.
  std::optional<std::span<const double>> find(std::string_view term) const;

  const std::string& term(std::size_t i) const { return terms_[i]; }
  std::span<const double> vector(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
  }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  friend EmbeddingTable load_embeddings(std::istream& in);
  void add(std::string term, std::span<const double> raw, std::size_t line);

  std::size_t dimension_ = 0;
  std::vector<std::string> terms_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses the "<count> <dim>" header followed by "<term> <f1> ... <fq>" lines.
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings_file(const std::filesystem::path& path);

/// Writes the table in the same text format using shortest round-trip
/// decimal representation.
void write_embeddings(std::ostream& out, const EmbeddingTable& table);

struct Label {
  LabelId id = 0;
  std::vector<std::string> synonyms;
  Split split = Split::Train;
};

struct LabelExclusion {
  LabelId id = 0;
  Split split = Split::Train;
  std::vector<std::string> synonyms;
  std::string reason;
};

/// Labels with their synonym terms and TRAIN/TEST assignment. Only labels with
/// at least one in-vocabulary synonym are retained; the rest are listed in
/// exclusions().
class LabelCatalog {
 public:
  LabelCatalog() = default;
  LabelCatalog(std::vector<Label> declared, const EmbeddingTable& table);

  /// Retained labels in declaration order.
  const std::vector<Label>& labels() const noexcept { return labels_; }
  const std::vector<LabelExclusion>& exclusions() const noexcept { return exclusions_; }

  const Label* find(LabelId id) const;
  bool is_resolved(LabelId id) const { return find(id) != nullptr; }
  bool is_declared(LabelId id) const { return declared_split_.contains(id); }
  std::optional<Split> declared_split(LabelId id) const;

  /// Retained ids of the given split, declaration order.
  std::vector<LabelId> ids(Split split) const;

  /// Every declared TRAIN id (retained or not) in declaration order. This is
  /// the index order of classifier score vectors.
  const std::vector<LabelId>& train_order() const noexcept { return train_order_; }

 private:
  std::vector<Label> labels_;
  std::vector<LabelExclusion> exclusions_;
  std::vector<LabelId> train_order_;
  std::unordered_map<LabelId, std::size_t> index_;
  std::unordered_map<LabelId, Split> declared_split_;
};

/// Reads "id TRAIN|TEST" lines in file order. Rejects duplicate ids.
std::vector<std::pair<LabelId, Split>> read_splits(std::istream& splits);
std::vector<std::pair<LabelId, Split>> read_splits_file(const std::filesystem::path& splits);

/// Reads the label map ("id<TAB>syn1,syn2") and split file ("id TRAIN|TEST").
LabelCatalog load_catalog(std::istream& label_map, std::istream& splits, const EmbeddingTable& table);
LabelCatalog load_catalog_files(const std::filesystem::path& label_map,
                                const std::filesystem::path& splits, const EmbeddingTable& table);

nlohmann::json exclusion_report(const LabelCatalog& catalog);

struct LabelEmbedding {
  LabelId label_id = 0;
  /// Unnormalized mean of the in-vocabulary synonym vectors.
  std::vector<double> mean_vector;
  std::vector<std::vector<double>> word_vectors;
  std::vector<std::string> terms;
};

LabelEmbedding label_embedding(const LabelCatalog& catalog, const EmbeddingTable& table, LabelId id);

/// Precomputed LabelEmbedding for every retained label.
class LabelEmbeddings {
 public:
  LabelEmbeddings() = default;
  LabelEmbeddings(const LabelCatalog& catalog, const EmbeddingTable& table);

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return entries_.size(); }

  const LabelEmbedding* find(LabelId id) const;
  /// Throws UnresolvedLabel when absent.
  const LabelEmbedding& at(LabelId id) const;

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<LabelId, LabelEmbedding> entries_;
};

}  // namespace conse
