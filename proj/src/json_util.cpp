#include "benchforge/json_util.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "benchforge/error.hpp"

namespace benchforge {
namespace {

namespace fs = std::filesystem;

// SAX pass that only tracks object keys; the DOM is built by a second parse.
class DuplicateKeyDetector : public nlohmann::json_sax<Json> {
 public:
  bool null() override { return true; }
  bool boolean(bool) override { return true; }
  bool number_integer(number_integer_t) override { return true; }
  bool number_unsigned(number_unsigned_t) override { return true; }
  bool number_float(number_float_t, const string_t&) override { return true; }
  bool string(string_t&) override { return true; }
  bool binary(binary_t&) override { return true; }
  bool start_object(std::size_t) override {
    keys_.emplace_back();
    return true;
  }
  bool key(string_t& k) override {
    if (!keys_.back().insert(k).second) {
      duplicate_ = k;
      return false;
    }
    return true;
  }
  bool end_object() override {
    keys_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override { return true; }
  bool end_array() override { return true; }
  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& ex) override {
    error_ = ex.what();
    position_ = position;
    return false;
  }

  const std::string& duplicate() const { return duplicate_; }
  const std::string& error() const { return error_; }

 private:
  std::vector<std::set<std::string>> keys_;
  std::string duplicate_;
  std::string error_;
  std::size_t position_ = 0;
};

void atomic_write(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

Json parse_json_strict(std::string_view text) {
  DuplicateKeyDetector detector;
  const bool ok = Json::sax_parse(text.begin(), text.end(), &detector);
  if (!ok) {
    if (!detector.duplicate().empty()) {
      throw ParseError("duplicate key \"" + detector.duplicate() + "\" in JSON object");
    }
    throw ParseError("invalid JSON: " + detector.error());
  }
  return Json::parse(text.begin(), text.end());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return parse_json_strict(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<Json> read_jsonl_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read file: " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      rows.push_back(parse_json_strict(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_json_file(const fs::path& path, const Json& doc) {
  atomic_write(path, doc.dump(2) + "\n");
}

void write_jsonl_file(const fs::path& path, const std::vector<Json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  atomic_write(path, out);
}

void append_jsonl_line(const fs::path& path, const Json& row) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot open for append: " + path.string());
  out << row.dump() << '\n';
  out.flush();
}

void write_text_file(const fs::path& path, std::string_view text) { atomic_write(path, text); }

std::string require_string(const Json& obj, std::string_view key) {
  if (!obj.is_object()) throw ValidationError("expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing field \"" + std::string(key) + "\"");
  if (!it->is_string()) throw ValidationError("field \"" + std::string(key) + "\" must be a string");
  return it->get<std::string>();
}

std::string optional_string(const Json& obj, std::string_view key) {
  if (!obj.is_object()) return {};
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw ValidationError("field \"" + std::string(key) + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace benchforge
