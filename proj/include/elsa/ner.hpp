#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "elsa/corpus.hpp"

namespace elsa::ner {

// Utterance with a single `_NE_` marker in front of the target entity.
struct MarkedUtterance {
  std::vector<std::string> tokens;
  std::vector<std::size_t> marker_positions;
  // offset_map[i] is the original index of marked token i, or -1 for a marker.
  std::vector<int> offset_map;
  EntityMention target;  // original coordinates

  // Carried so that stripping reproduces the source utterance exactly.
  std::string id;
  std::string text;
  std::optional<std::string> call_id;
  std::optional<std::string> timestamp;

  std::size_t word_count() const { return tokens.size() - marker_positions.size(); }
};

MarkedUtterance insert_ne_markers(const Utterance& utterance, const EntityMention& target);
Utterance strip_markers(const MarkedUtterance& marked);

class EntityDetector {
 public:
  virtual ~EntityDetector() = default;
  virtual std::vector<EntityMention> detect(const Utterance& utterance) const = 0;
};

// Runs the detector and enforces the output contract: sorted by start,
// non-overlapping, never covering a marker token.
std::vector<EntityMention> detect_entities(const Utterance& utterance, const EntityDetector& model);

// Longest-match, case-insensitive dictionary matcher.
class Gazetteer : public EntityDetector {
 public:
  Gazetteer() = default;
  explicit Gazetteer(const std::vector<EntityEntry>& entries);

  // File format: one `surface<TAB>type` entry per line; '#' starts a comment.
  static Gazetteer load(const std::filesystem::path& path);

  void add(const std::string& surface, EntityType type);
  std::size_t size() const { return size_; }
  bool loaded() const { return loaded_; }

  std::vector<EntityMention> detect(const Utterance& utterance) const override;

 private:
  struct Entry {
    std::vector<std::string> tokens;  // lowercased
    EntityType type;
  };
  // Keyed by the lowercased first token; each bucket is sorted longest first.
  std::unordered_map<std::string, std::vector<Entry>> by_first_;
  std::size_t size_ = 0;
  bool loaded_ = false;
};

}  // namespace elsa::ner
