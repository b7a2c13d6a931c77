#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "benchforge/json_util.hpp"

namespace benchforge {

/// Identifiers are non-empty, case-sensitive and limited to [A-Za-z0-9_-]
/// because they end up in file names and JSON keys.
bool is_valid_identifier(std::string_view id);

struct Area {
  std::string area_id;
  std::string name;
  std::string description;

  bool operator==(const Area&) const = default;
};

struct Competency {
  std::string competency_id;
  std::string name;
  std::string area_id;
  std::string description;

  bool operator==(const Competency&) const = default;
};

/// Two-level area -> competency structure. Construct through
/// `Taxonomy::from_json` or `load_taxonomy` so the invariants hold.
class Taxonomy {
 public:
  static Taxonomy from_json(const Json& doc);
  Json to_json() const;

  const std::string& domain_name() const { return domain_name_; }
  const std::vector<Area>& areas() const { return areas_; }
  const std::vector<Competency>& competencies() const { return competencies_; }
  std::size_t competency_count() const { return competencies_.size(); }

  const Area* find_area(std::string_view id) const;
  const Competency* find_competency(std::string_view id) const;
  const Competency* find_competency_by_name(std::string_view name) const;
  std::vector<const Competency*> competencies_in(std::string_view area_id) const;

  bool operator==(const Taxonomy&) const = default;

 private:
  std::string domain_name_;
  std::vector<Area> areas_;
  std::vector<Competency> competencies_;
};

Taxonomy load_taxonomy(const std::filesystem::path& path);

struct ChapterDoc {
  std::string book_id;
  std::string chapter_id;
  std::string title;
  std::string competency_id;
  std::string body;
};

/// One entry of the chapter manifest; `path` is resolved relative to the
/// manifest's directory.
struct ChapterManifestEntry {
  std::string book_id;
  std::string chapter_id;
  std::string title;
  std::string competency_id;
  std::filesystem::path path;
};

/// Manifest is either a single entry object or an array of them.
std::vector<ChapterManifestEntry> load_chapter_manifest(const std::filesystem::path& manifest);

/// Loads the chapter text for `entry`, validating against `taxonomy`.
ChapterDoc load_chapter(const ChapterManifestEntry& entry, const Taxonomy& taxonomy);

/// Loads a chapter text file whose metadata lives in the sibling manifest
/// `<path>.json` (or `<stem>.json`).
ChapterDoc load_chapter(const std::filesystem::path& path, const Taxonomy& taxonomy);

std::vector<ChapterDoc> load_corpus(const std::filesystem::path& manifest, const Taxonomy& taxonomy);

struct CoverageReport {
  std::vector<std::string> uncovered_competencies;  // taxonomy order
  std::map<std::string, std::size_t> chapters_per_area;
  std::vector<std::string> duplicate_chapter_ids;   // sorted, unique
  std::vector<std::string> warnings;                // human-readable, one per finding

  Json to_json() const;
};

CoverageReport validate_corpus(const Taxonomy& taxonomy, const std::vector<ChapterDoc>& chapters);

}  // namespace benchforge
