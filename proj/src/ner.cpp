#include "elsa/ner.hpp"

#include <algorithm>
#include <fstream>

#include "elsa/error.hpp"

namespace elsa::ner {

MarkedUtterance insert_ne_markers(const Utterance& u, const EntityMention& target) {
  const int n = static_cast<int>(u.tokens.size());
  if (target.span.start < 0 || target.span.start >= target.span.end || target.span.end > n)
    throw Error("invalid mention span [" + std::to_string(target.span.start) + ", " +
                std::to_string(target.span.end) + ") for utterance '" + u.id + "' with " +
                std::to_string(n) + " tokens");
  for (const auto& tok : u.tokens) {
    if (tok == kMarkerToken)
      throw Error("utterance '" + u.id + "' already contains the reserved token _NE_");
  }

  MarkedUtterance m;
  m.tokens.reserve(u.tokens.size() + 1);
  m.offset_map.reserve(u.tokens.size() + 1);
  for (int i = 0; i < n; ++i) {
    if (i == target.span.start) {
      m.marker_positions.push_back(m.tokens.size());
      m.tokens.emplace_back(kMarkerToken);
      m.offset_map.push_back(-1);
    }
    m.tokens.push_back(u.tokens[i]);
    m.offset_map.push_back(i);
  }
  m.target = target;
  m.id = u.id;
  m.text = u.text;
  m.call_id = u.call_id;
  m.timestamp = u.timestamp;
  return m;
}

Utterance strip_markers(const MarkedUtterance& m) {
  if (m.offset_map.size() != m.tokens.size())
    throw Error("malformed marker bookkeeping: offset map size differs from token count");
  std::vector<bool> is_marker(m.tokens.size(), false);
  for (auto p : m.marker_positions) {
    if (p >= m.tokens.size() || m.tokens[p] != kMarkerToken || m.offset_map[p] != -1)
      throw Error("malformed marker bookkeeping: bad marker position " + std::to_string(p));
    is_marker[p] = true;
  }
  Utterance u;
  u.id = m.id;
  u.text = m.text;
  u.call_id = m.call_id;
  u.timestamp = m.timestamp;
  for (std::size_t i = 0; i < m.tokens.size(); ++i) {
    if (is_marker[i]) continue;
    if (m.offset_map[i] != static_cast<int>(u.tokens.size()))
      throw Error("malformed marker bookkeeping: token " + std::to_string(i) +
                  " does not map to original index " + std::to_string(u.tokens.size()));
    u.tokens.push_back(m.tokens[i]);
  }
  return u;
}

std::vector<EntityMention> detect_entities(const Utterance& u, const EntityDetector& model) {
  auto mentions = model.detect(u);
  std::sort(mentions.begin(), mentions.end(),
            [](const auto& a, const auto& b) { return a.span < b.span; });
  std::vector<EntityMention> out;
  const int n = static_cast<int>(u.tokens.size());
  for (auto& m : mentions) {
    if (m.span.start < 0 || m.span.start >= m.span.end || m.span.end > n) continue;
    bool covers_marker = false;
    for (int i = m.span.start; i < m.span.end; ++i)
      covers_marker = covers_marker || u.tokens[i] == kMarkerToken;
    if (covers_marker) continue;
    if (!out.empty() && out.back().span.overlaps(m.span)) continue;
    out.push_back(std::move(m));
  }
  return out;
}

Gazetteer::Gazetteer(const std::vector<EntityEntry>& entries) {
  loaded_ = true;
  for (const auto& e : entries) add(e.surface, e.type);
}

void Gazetteer::add(const std::string& surface, EntityType type) {
  loaded_ = true;
  Entry e{tokenize(to_lower(surface)), type};
  if (e.tokens.empty()) return;
  for (const auto& tok : e.tokens) {
    if (tok == to_lower(kMarkerToken))
      throw Error("gazetteer entry '" + surface + "' contains the reserved token _NE_");
  }
  auto& bucket = by_first_[e.tokens.front()];
  for (const auto& existing : bucket) {
    if (existing.tokens == e.tokens) return;
  }
  bucket.push_back(std::move(e));
  std::stable_sort(bucket.begin(), bucket.end(), [](const Entry& a, const Entry& b) {
    return a.tokens.size() > b.tokens.size();
  });
  ++size_;
}

Gazetteer Gazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gazetteer '" + path.string() + "'");
  Gazetteer g;
  g.loaded_ = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), lineno, "expected surface<TAB>type");
    auto type = parse_entity_type(line.substr(tab + 1));
    if (!type) throw ParseError(path.string(), lineno, "unknown entity type '" + line.substr(tab + 1) + "'");
    try {
      g.add(line.substr(0, tab), *type);
    } catch (const Error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return g;
}

std::vector<EntityMention> Gazetteer::detect(const Utterance& u) const {
  if (!loaded_) throw ModelNotLoaded("gazetteer not loaded");
  std::vector<std::string> lowered;
  lowered.reserve(u.tokens.size());
  for (const auto& t : u.tokens) lowered.push_back(to_lower(t));

  std::vector<EntityMention> out;
  std::size_t i = 0;
  while (i < lowered.size()) {
    const Entry* best = nullptr;
    if (u.tokens[i] != kMarkerToken) {
      if (auto it = by_first_.find(lowered[i]); it != by_first_.end()) {
        for (const auto& e : it->second) {
          if (i + e.tokens.size() > lowered.size()) continue;
          if (std::equal(e.tokens.begin(), e.tokens.end(), lowered.begin() + i)) {
            best = &e;
            break;
          }
        }
      }
    }
    if (!best) {
      ++i;
      continue;
    }
    TokenSpan span{static_cast<int>(i), static_cast<int>(i + best->tokens.size())};
    out.push_back({span, best->type, span_surface(u, span)});
    i += best->tokens.size();
  }
  return out;
}

}  // namespace elsa::ner
