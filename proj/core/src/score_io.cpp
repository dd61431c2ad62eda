#include "conse/score_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "conse/error.hpp"
#include "text_util.hpp"

namespace conse {

ScoreRecord parse_score_line(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::Parse, "score line is not a JSON object");

  ScoreRecord record;
  auto id = j.find("image_id");
  if (id == j.end() || !id->is_string()) throw Error(ErrorCode::Parse, "score line lacks string image_id");
  record.image_id = id->get<std::string>();

  auto scores = j.find("scores");
  if (scores == j.end() || !scores->is_array()) {
    throw Error(ErrorCode::Parse, "image '" + record.image_id + "' lacks a scores array");
  }
  record.scores.reserve(scores->size());
  for (const auto& s : *scores) {
    if (!s.is_number()) throw Error(ErrorCode::Parse, "image '" + record.image_id + "' has a non-numeric score");
    record.scores.push_back(s.get<double>());
  }

  if (auto label = j.find("true_label"); label != j.end() && !label->is_null()) {
    if (!label->is_number_integer()) {
      throw Error(ErrorCode::Parse, "image '" + record.image_id + "' has a non-integer true_label");
    }
    record.true_label = label->get<LabelId>();
  }
  return record;
}

std::vector<ScoreRecord> read_score_records(std::istream& in) {
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank(line)) continue;
    try {
      out.push_back(parse_score_line(detail::strip_cr(line)));
    } catch (const Error& e) {
      throw Error(e.code(), "scores line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ScoreRecord> read_score_records_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_score_records(in);
}

void write_score_record(std::ostream& out, const ScoreRecord& record) {
  // Hand-written so that scores use shortest round-trip formatting.
  out << "{\"image_id\":" << nlohmann::json(record.image_id).dump() << ",\"scores\":[";
  for (std::size_t i = 0; i < record.scores.size(); ++i) {
    if (i > 0) out << ',';
    out << detail::format_double(record.scores[i]);
  }
  out << ']';
  if (record.true_label) out << ",\"true_label\":" << *record.true_label;
  out << "}\n";
}

nlohmann::json to_json(const ConseVector& v) {
  nlohmann::json support = nlohmann::json::array();
  for (const auto& w : v.support) support.push_back({{"label_id", w.label_id}, {"weight", w.weight}});
  std::vector<double> direction(v.vector.size(), 0.0);
  if (v.norm > 0.0) {
    for (std::size_t d = 0; d < direction.size(); ++d) direction[d] = v.vector[d] / v.norm;
  }
  return {{"image_id", v.image_id},
          {"vector", v.vector},
          {"norm", v.norm},
          {"direction", std::move(direction)},
          {"support", std::move(support)}};
}

nlohmann::json to_json(const RankedPrediction& p) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& s : p.ranked) ranked.push_back({{"label_id", s.label_id}, {"score", s.score}});
  return {{"image_id", p.image_id}, {"ranked", std::move(ranked)}};
}

}  // namespace conse
