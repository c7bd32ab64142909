#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pyrabow/matrix.hpp"

namespace pyrabow {

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; parent directories are created.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_escape(const std::string& field);

/// One row per vector: label first, then the values.
void write_feature_csv(const std::filesystem::path& path, const Matrix& rows,
                       std::span<const int> labels);

}  // namespace pyrabow
