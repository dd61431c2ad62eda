#include "conse/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "conse/error.hpp"
#include "text_util.hpp"

namespace conse {

std::string_view to_string(Split split) noexcept {
  return split == Split::Train ? "TRAIN" : "TEST";
}

namespace {

std::string at_line(std::size_t line) { return "line " + std::to_string(line); }

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return in;
}

}  // namespace

void EmbeddingTable::add(std::string term, std::span<const double> raw, std::size_t line) {
  if (term.empty()) throw Error(ErrorCode::Parse, at_line(line) + ": empty term");
  if (raw.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, at_line(line) + ": term '" + term + "' has " +
                                                  std::to_string(raw.size()) + " values, expected " +
                                                  std::to_string(dimension_));
  }
  double sum_sq = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::NonFinite, at_line(line) + ": term '" + term + "' has a non-finite value");
    }
    sum_sq += x * x;
  }
  double norm = std::sqrt(sum_sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::ZeroVector, at_line(line) + ": term '" + term + "' cannot be normalized");
  }
  if (index_.contains(term)) {
    throw Error(ErrorCode::DuplicateTerm, at_line(line) + ": term '" + term + "' repeated");
  }
  index_.emplace(term, terms_.size());
  terms_.push_back(std::move(term));
  for (double x : raw) data_.push_back(x / norm);
}

EmbeddingTable EmbeddingTable::from_vectors(
    std::size_t dimension, std::vector<std::pair<std::string, std::vector<double>>> entries) {
  if (dimension == 0) throw Error(ErrorCode::Parse, "dimension must be positive");
  EmbeddingTable table;
  table.dimension_ = dimension;
  table.terms_.reserve(entries.size());
  table.data_.reserve(entries.size() * dimension);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    table.add(std::move(entries[i].first), entries[i].second, i + 1);
  }
  return table;
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return vector(it->second);
}

EmbeddingTable load_embeddings(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "missing header line");
  ++line_no;
  auto header = detail::split(detail::strip_cr(line), ' ');
  if (header.size() != 2) throw Error(ErrorCode::Parse, "header must be '<count> <dim>'");
  auto count = detail::parse_int(header[0]);
  auto dim = detail::parse_int(header[1]);
  if (!count || !dim || *count < 0 || *dim <= 0) {
    throw Error(ErrorCode::Parse, "header must be '<count> <dim>' with positive dimension");
  }

  EmbeddingTable table = EmbeddingTable::from_vectors(static_cast<std::size_t>(*dim), {});
  std::vector<double> values;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::strip_cr(line);
    if (detail::is_blank(view)) continue;
    auto fields = detail::split(view, ' ');
    values.clear();
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = detail::parse_double(fields[i]);
      if (!v) {
        throw Error(ErrorCode::Parse,
                    at_line(line_no) + ": bad number '" + std::string(fields[i]) + "'");
      }
      values.push_back(*v);
    }
    table.add(std::string(fields[0]), values, line_no);
    ++seen;
  }
  if (seen != static_cast<std::size_t>(*count)) {
    throw Error(ErrorCode::CountMismatch, "header declares " + std::to_string(*count) +
                                              " entries, body has " + std::to_string(seen));
  }
  return table;
}

EmbeddingTable load_embeddings_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_embeddings(in);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dimension() << '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.term(i);
    for (double x : table.vector(i)) out << ' ' << detail::format_double(x);
    out << '\n';
  }
}

LabelCatalog::LabelCatalog(std::vector<Label> declared, const EmbeddingTable& table) {
  for (auto& label : declared) {
    if (label.synonyms.empty()) {
      throw Error(ErrorCode::EmptySynonyms, "label " + std::to_string(label.id) + " has no synonyms");
    }
    if (!declared_split_.emplace(label.id, label.split).second) {
      throw Error(ErrorCode::DuplicateLabel, "label " + std::to_string(label.id) + " declared twice");
    }
    if (label.split == Split::Train) train_order_.push_back(label.id);

    bool resolved = std::any_of(label.synonyms.begin(), label.synonyms.end(),
                                [&](const std::string& s) { return table.contains(s); });
    if (resolved) {
      index_.emplace(label.id, labels_.size());
      labels_.push_back(std::move(label));
    } else {
      exclusions_.push_back(
          {label.id, label.split, std::move(label.synonyms), "all synonyms out of vocabulary"});
    }
  }
}

const Label* LabelCatalog::find(LabelId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &labels_[it->second];
}

std::optional<Split> LabelCatalog::declared_split(LabelId id) const {
  auto it = declared_split_.find(id);
  if (it == declared_split_.end()) return std::nullopt;
  return it->second;
}

std::vector<LabelId> LabelCatalog::ids(Split split) const {
  std::vector<LabelId> out;
  for (const auto& label : labels_) {
    if (label.split == split) out.push_back(label.id);
  }
  return out;
}

std::vector<std::pair<LabelId, Split>> read_splits(std::istream& splits) {
  std::vector<std::pair<LabelId, Split>> out;
  std::unordered_set<LabelId> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(splits, line)) {
    ++line_no;
    std::string_view view = detail::strip_cr(line);
    if (detail::is_blank(view)) continue;
    auto fields = detail::split(view, ' ');
    if (fields.size() != 2) {
      throw Error(ErrorCode::Parse, "split file " + at_line(line_no) + ": expected 'id TRAIN|TEST'");
    }
    auto id = detail::parse_int(fields[0]);
    if (!id) throw Error(ErrorCode::Parse, "split file " + at_line(line_no) + ": bad label id");
    Split split = Split::Train;
    if (fields[1] == "TEST") {
      split = Split::Test;
    } else if (fields[1] != "TRAIN") {
      throw Error(ErrorCode::Parse, "split file " + at_line(line_no) + ": split must be TRAIN or TEST");
    }
    if (!seen.insert(*id).second) {
      throw Error(ErrorCode::DuplicateLabel, "split file assigns label " + std::to_string(*id) + " twice");
    }
    out.emplace_back(*id, split);
  }
  return out;
}

std::vector<std::pair<LabelId, Split>> read_splits_file(const std::filesystem::path& splits) {
  auto in = open_or_throw(splits);
  return read_splits(in);
}

LabelCatalog load_catalog(std::istream& label_map, std::istream& splits, const EmbeddingTable& table) {
  std::vector<Label> declared;
  std::unordered_map<LabelId, std::size_t> position;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(label_map, line)) {
    ++line_no;
    std::string_view view = detail::strip_cr(line);
    if (detail::is_blank(view)) continue;
    auto tab = view.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::Parse, "label map " + at_line(line_no) + ": expected 'id<TAB>synonyms'");
    }
    auto id = detail::parse_int(view.substr(0, tab));
    if (!id) throw Error(ErrorCode::Parse, "label map " + at_line(line_no) + ": bad label id");
    if (position.contains(*id)) {
      throw Error(ErrorCode::DuplicateLabel, "label " + std::to_string(*id) + " declared twice");
    }
    Label label;
    label.id = *id;
    for (auto term : detail::split(view.substr(tab + 1), ',')) label.synonyms.emplace_back(term);
    if (label.synonyms.empty()) {
      throw Error(ErrorCode::EmptySynonyms, "label " + std::to_string(*id) + " has no synonyms");
    }
    position.emplace(*id, declared.size());
    declared.push_back(std::move(label));
  }

  std::unordered_set<LabelId> assigned;
  for (const auto& [id, split] : read_splits(splits)) {
    auto it = position.find(id);
    if (it == position.end()) {
      throw Error(ErrorCode::UnknownLabel, "split file references unknown label " + std::to_string(id));
    }
    assigned.insert(id);
    declared[it->second].split = split;
  }
  for (const auto& label : declared) {
    if (!assigned.contains(label.id)) {
      throw Error(ErrorCode::MissingSplit, "label " + std::to_string(label.id) + " has no split");
    }
  }
  return LabelCatalog(std::move(declared), table);
}

LabelCatalog load_catalog_files(const std::filesystem::path& label_map,
                                const std::filesystem::path& splits, const EmbeddingTable& table) {
  auto map_in = open_or_throw(label_map);
  auto split_in = open_or_throw(splits);
  return load_catalog(map_in, split_in, table);
}

nlohmann::json exclusion_report(const LabelCatalog& catalog) {
  nlohmann::json excluded = nlohmann::json::array();
  for (const auto& ex : catalog.exclusions()) {
    excluded.push_back({{"label_id", ex.id},
                        {"split", to_string(ex.split)},
                        {"synonyms", ex.synonyms},
                        {"reason", ex.reason}});
  }
  return {{"retained", catalog.labels().size()}, {"excluded", std::move(excluded)}};
}

LabelEmbedding label_embedding(const LabelCatalog& catalog, const EmbeddingTable& table, LabelId id) {
  const Label* label = catalog.find(id);
  if (label == nullptr) {
    throw Error(ErrorCode::UnresolvedLabel, "label " + std::to_string(id) + " is not resolved");
  }
  LabelEmbedding out;
  out.label_id = id;
  for (const auto& term : label->synonyms) {
    if (auto v = table.find(term)) {
      out.terms.push_back(term);
      out.word_vectors.emplace_back(v->begin(), v->end());
    }
  }
  if (out.word_vectors.empty()) {
    throw Error(ErrorCode::UnresolvedLabel, "label " + std::to_string(id) + " has no vectors");
  }

  // Sum in byte order of terms so the mean does not depend on synonym order.
  std::vector<std::size_t> order(out.terms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return out.terms[a] < out.terms[b]; });
  out.mean_vector.assign(table.dimension(), 0.0);
  for (std::size_t i : order) {
    for (std::size_t d = 0; d < table.dimension(); ++d) out.mean_vector[d] += out.word_vectors[i][d];
  }
  const double n = static_cast<double>(out.word_vectors.size());
  for (double& x : out.mean_vector) x /= n;
  return out;
}

LabelEmbeddings::LabelEmbeddings(const LabelCatalog& catalog, const EmbeddingTable& table)
    : dimension_(table.dimension()) {
  for (const auto& label : catalog.labels()) {
    entries_.emplace(label.id, label_embedding(catalog, table, label.id));
  }
}

const LabelEmbedding* LabelEmbeddings::find(LabelId id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

const LabelEmbedding& LabelEmbeddings::at(LabelId id) const {
  const LabelEmbedding* e = find(id);
  if (e == nullptr) {
    throw Error(ErrorCode::UnresolvedLabel, "label " + std::to_string(id) + " has no embedding");
  }
  return *e;
}

}  // namespace conse
