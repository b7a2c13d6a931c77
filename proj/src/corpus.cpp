#include "benchforge/corpus.hpp"

#include <algorithm>
#include <set>

#include "benchforge/error.hpp"

namespace benchforge {
namespace fs = std::filesystem;

namespace {

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(first, last - first + 1));
}

void require_identifier(const std::string& id, std::string_view what) {
  if (!is_valid_identifier(id)) {
    throw ValidationError("invalid " + std::string(what) + " identifier \"" + id + "\"");
  }
}

ChapterManifestEntry entry_from_json(const Json& j, const fs::path& base) {
  ChapterManifestEntry e;
  e.book_id = require_string(j, "book_id");
  e.chapter_id = require_string(j, "chapter_id");
  e.title = optional_string(j, "title");
  if (j.contains("competency_ids")) {
    throw ValidationError("chapter \"" + e.chapter_id +
                          "\": multi-competency chapters are not supported; use competency_id");
  }
  e.competency_id = require_string(j, "competency_id");
  e.path = base / require_string(j, "path");
  require_identifier(e.book_id, "book");
  require_identifier(e.chapter_id, "chapter");
  return e;
}

}  // namespace

bool is_valid_identifier(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

Taxonomy Taxonomy::from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("taxonomy document must be a JSON object");
  Taxonomy t;
  t.domain_name_ = require_string(doc, "domain");
  if (!doc.contains("areas") || !doc["areas"].is_array())
    throw ValidationError("taxonomy: \"areas\" must be an array");
  if (!doc.contains("competencies") || !doc["competencies"].is_array())
    throw ValidationError("taxonomy: \"competencies\" must be an array");

  std::set<std::string> area_ids;
  for (const auto& a : doc["areas"]) {
    Area area{require_string(a, "id"), require_string(a, "name"), optional_string(a, "description")};
    require_identifier(area.area_id, "area");
    if (!area_ids.insert(area.area_id).second)
      throw ValidationError("duplicate area identifier \"" + area.area_id + "\"");
    t.areas_.push_back(std::move(area));
  }

  std::set<std::string> comp_ids;
  std::set<std::string> owning_areas;
  for (const auto& c : doc["competencies"]) {
    Competency comp{require_string(c, "id"), require_string(c, "name"), require_string(c, "area_id"),
                    optional_string(c, "description")};
    require_identifier(comp.competency_id, "competency");
    if (!comp_ids.insert(comp.competency_id).second)
      throw ValidationError("duplicate competency identifier \"" + comp.competency_id + "\"");
    if (area_ids.count(comp.area_id) == 0)
      throw ValidationError("competency \"" + comp.competency_id + "\" references unknown area \"" +
                            comp.area_id + "\"");
    owning_areas.insert(comp.area_id);
    t.competencies_.push_back(std::move(comp));
  }
  for (const auto& a : t.areas_) {
    if (owning_areas.count(a.area_id) == 0)
      throw ValidationError("area \"" + a.area_id + "\" has no competencies");
  }
  return t;
}

Json Taxonomy::to_json() const {
  Json doc;
  doc["domain"] = domain_name_;
  doc["areas"] = Json::array();
  for (const auto& a : areas_)
    doc["areas"].push_back({{"id", a.area_id}, {"name", a.name}, {"description", a.description}});
  doc["competencies"] = Json::array();
  for (const auto& c : competencies_)
    doc["competencies"].push_back(
        {{"id", c.competency_id}, {"name", c.name}, {"area_id", c.area_id}, {"description", c.description}});
  return doc;
}

const Area* Taxonomy::find_area(std::string_view id) const {
  for (const auto& a : areas_)
    if (a.area_id == id) return &a;
  return nullptr;
}

const Competency* Taxonomy::find_competency(std::string_view id) const {
  for (const auto& c : competencies_)
    if (c.competency_id == id) return &c;
  return nullptr;
}

const Competency* Taxonomy::find_competency_by_name(std::string_view name) const {
  for (const auto& c : competencies_)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<const Competency*> Taxonomy::competencies_in(std::string_view area_id) const {
  std::vector<const Competency*> out;
  for (const auto& c : competencies_)
    if (c.area_id == area_id) out.push_back(&c);
  return out;
}

Taxonomy load_taxonomy(const fs::path& path) {
  const Json doc = read_json_file(path);
  try {
    return Taxonomy::from_json(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<ChapterManifestEntry> load_chapter_manifest(const fs::path& manifest) {
  const Json doc = read_json_file(manifest);
  const fs::path base = manifest.parent_path();
  std::vector<ChapterManifestEntry> entries;
  if (doc.is_array()) {
    for (const auto& j : doc) entries.push_back(entry_from_json(j, base));
  } else if (doc.is_object() && doc.contains("chapters")) {
    for (const auto& j : doc["chapters"]) entries.push_back(entry_from_json(j, base));
  } else {
    entries.push_back(entry_from_json(doc, base));
  }
  return entries;
}

ChapterDoc load_chapter(const ChapterManifestEntry& entry, const Taxonomy& taxonomy) {
  if (!fs::exists(entry.path)) throw MissingArtifactError("chapter file not found: " + entry.path.string());
  ChapterDoc doc{entry.book_id, entry.chapter_id, entry.title, entry.competency_id, read_text_file(entry.path)};
  if (trim_copy(doc.body).empty())
    throw ValidationError("chapter \"" + doc.chapter_id + "\" has an empty body: " + entry.path.string());
  if (taxonomy.find_competency(doc.competency_id) == nullptr)
    throw ValidationError("chapter \"" + doc.chapter_id + "\" references unknown competency \"" +
                          doc.competency_id + "\"");
  return doc;
}

ChapterDoc load_chapter(const fs::path& path, const Taxonomy& taxonomy) {
  if (!fs::exists(path)) throw MissingArtifactError("chapter file not found: " + path.string());
  fs::path manifest = path;
  manifest += ".json";
  if (!fs::exists(manifest)) manifest = fs::path(path).replace_extension(".json");
  if (!fs::exists(manifest) || manifest == path)
    throw MissingArtifactError("chapter manifest not found for " + path.string());
  auto entries = load_chapter_manifest(manifest);
  if (entries.size() != 1) throw ValidationError("sibling manifest must hold one entry: " + manifest.string());
  entries.front().path = path;
  return load_chapter(entries.front(), taxonomy);
}

std::vector<ChapterDoc> load_corpus(const fs::path& manifest, const Taxonomy& taxonomy) {
  std::vector<ChapterDoc> out;
  for (const auto& e : load_chapter_manifest(manifest)) out.push_back(load_chapter(e, taxonomy));
  return out;
}

Json CoverageReport::to_json() const {
  Json j;
  j["uncovered_competencies"] = uncovered_competencies;
  j["chapters_per_area"] = Json::object();
  for (const auto& [area, n] : chapters_per_area) j["chapters_per_area"][area] = n;
  j["duplicate_chapter_ids"] = duplicate_chapter_ids;
  j["warnings"] = warnings;
  return j;
}

CoverageReport validate_corpus(const Taxonomy& taxonomy, const std::vector<ChapterDoc>& chapters) {
  CoverageReport report;
  std::set<std::string> covered;
  for (const auto& a : taxonomy.areas()) report.chapters_per_area[a.area_id] = 0;
  for (const auto& ch : chapters) {
    covered.insert(ch.competency_id);
    if (const auto* comp = taxonomy.find_competency(ch.competency_id)) {
      ++report.chapters_per_area[comp->area_id];
    } else {
      report.warnings.push_back("chapter \"" + ch.chapter_id + "\" references unknown competency \"" +
                                ch.competency_id + "\"");
    }
  }
  for (const auto& c : taxonomy.competencies()) {
    if (covered.count(c.competency_id) == 0) {
      report.uncovered_competencies.push_back(c.competency_id);
      report.warnings.push_back("competency \"" + c.competency_id + "\" has no chapters");
    }
  }
  std::map<std::string, std::set<std::string>> books_by_chapter;
  std::map<std::string, std::size_t> occurrences;
  for (const auto& ch : chapters) {
    books_by_chapter[ch.chapter_id].insert(ch.book_id);
    ++occurrences[ch.chapter_id];
  }
  for (const auto& [chapter_id, n] : occurrences) {
    if (n > 1) {
      report.duplicate_chapter_ids.push_back(chapter_id);
      report.warnings.push_back("chapter id \"" + chapter_id + "\" appears " + std::to_string(n) +
                                " times across " + std::to_string(books_by_chapter[chapter_id].size()) +
                                " book(s)");
    }
  }
  return report;
}

}  // namespace benchforge
