#include "pyrabow/io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pyrabow/error.hpp"

namespace pyrabow {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return {buf, end};
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_feature_csv(const std::filesystem::path& path, const Matrix& rows,
                       std::span<const int> labels) {
  if (labels.size() != rows.rows()) throw Error("feature CSV: label count mismatch");
  std::ostringstream os;
  os << "label";
  for (std::size_t j = 0; j < rows.cols(); ++j) os << ",f" << j;
  os << '\n';
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    os << labels[i];
    for (double v : rows.row(i)) os << ',' << format_double(v);
    os << '\n';
  }
  write_text_file(path, os.str());
}

}  // namespace pyrabow
