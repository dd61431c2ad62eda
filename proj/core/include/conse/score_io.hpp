#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "conse/conse.hpp"

namespace conse {

/// Parses one JSON-lines record {"image_id", "scores", "true_label"}. Only the
/// shape is checked here; see validate() for distribution checks.
ScoreRecord parse_score_line(std::string_view line);

std::vector<ScoreRecord> read_score_records(std::istream& in);
std::vector<ScoreRecord> read_score_records_file(const std::filesystem::path& path);

void write_score_record(std::ostream& out, const ScoreRecord& record);

nlohmann::json to_json(const ConseVector& v);
nlohmann::json to_json(const RankedPrediction& p);

}  // namespace conse
