#include "dvnee/doc_model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

namespace dvnee {

using ordered_json = nlohmann::ordered_json;

ParseError::ParseError(std::size_t line, const std::string& field, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + what),
      line_(line),
      field_(field) {}

ValidationError::ValidationError(const std::string& rule, const std::string& what)
    : std::runtime_error("invariant '" + rule + "' violated: " + what), rule_(rule) {}

std::string_view to_string(MentionLevel level) {
  switch (level) {
    case MentionLevel::Name: return "name";
    case MentionLevel::Nominal: return "nominal";
    case MentionLevel::Pronoun: return "pronoun";
  }
  return "name";
}

MentionLevel mention_level_from_string(std::string_view s) {
  if (s == "name") return MentionLevel::Name;
  if (s == "nominal") return MentionLevel::Nominal;
  if (s == "pronoun") return MentionLevel::Pronoun;
  throw std::invalid_argument("unknown mention level '" + std::string(s) + "'");
}

std::size_t Document::sentence_of(std::size_t token) const {
  auto it = std::upper_bound(sentences.begin(), sentences.end(), token,
                             [](std::size_t t, const SentenceBounds& s) { return t < s.end; });
  if (it == sentences.end() || token < it->start) {
    throw std::out_of_range("token " + std::to_string(token) + " outside every sentence");
  }
  return static_cast<std::size_t>(it - sentences.begin());
}

namespace {

std::size_t index_of(const std::vector<std::string>& names, std::string_view name, const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw std::invalid_argument(std::string("unknown ") + what + " '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

void require_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw ValidationError("inventory_unique", std::string("duplicate ") + what + " '" + n + "'");
    }
  }
}

}  // namespace

std::size_t TypeInventory::event_index(std::string_view name) const {
  return index_of(event_types, name, "event type");
}
std::size_t TypeInventory::entity_index(std::string_view name) const {
  return index_of(entity_types, name, "entity type");
}
std::size_t TypeInventory::role_index(std::string_view name) const {
  return index_of(argument_roles, name, "argument role");
}

void TypeInventory::validate() const {
  if (event_types.empty() || event_types.front() != kNullType) {
    throw ValidationError("inventory_null", "event_types must start with NULL");
  }
  if (k_max == 0) throw ValidationError("inventory_kmax", "k_max must be >= 1");
  require_unique(event_types, "event type");
  require_unique(entity_types, "entity type");
  require_unique(argument_roles, "argument role");
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct FieldReader {
  std::size_t line;

  const ordered_json& get(const ordered_json& obj, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, key, "missing");
    return *it;
  }

  std::size_t index(const ordered_json& v, const std::string& field) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ParseError(line, field, "expected non-negative integer");
    }
    return v.get<std::size_t>();
  }

  std::string string(const ordered_json& v, const std::string& field) const {
    if (!v.is_string()) throw ParseError(line, field, "expected string");
    return v.get<std::string>();
  }

  const ordered_json& array(const ordered_json& v, const std::string& field) const {
    if (!v.is_array()) throw ParseError(line, field, "expected array");
    return v;
  }

  ClusterSet clusters(const ordered_json& v, const std::string& field) const {
    ClusterSet out;
    for (std::size_t c = 0; c < array(v, field).size(); ++c) {
      const auto f = field + "[" + std::to_string(c) + "]";
      std::vector<std::size_t> members;
      for (const auto& m : array(v[c], f)) members.push_back(index(m, f));
      out.push_back(std::move(members));
    }
    return out;
  }
};

Span make_span(const Document& doc, std::size_t start, std::size_t end, const std::string& where) {
  if (start > end) throw ValidationError("span_order", where + ": start > end");
  if (end >= doc.token_count()) throw ValidationError("span_in_document", where + ": end past last token");
  const std::size_t s = doc.sentence_of(start);
  if (end >= doc.sentences[s].end) {
    throw ValidationError("span_in_sentence", where + ": span crosses a sentence boundary");
  }
  return Span{start, end, s};
}

}  // namespace

Document parse_document(std::string_view line, std::size_t line_no) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, "<record>", e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "<record>", "expected a JSON object");

  const FieldReader r{line_no};
  Document doc;
  doc.doc_id = r.string(r.get(j, "doc_id"), "doc_id");
  for (const auto& t : r.array(r.get(j, "tokens"), "tokens")) doc.tokens.push_back(r.string(t, "tokens"));
  for (const auto& s : r.array(r.get(j, "sentences"), "sentences")) {
    if (!s.is_array() || s.size() != 2) throw ParseError(line_no, "sentences", "expected [start, end] pairs");
    doc.sentences.push_back({r.index(s[0], "sentences"), r.index(s[1], "sentences")});
  }

  // Sentence invariants first: span construction below relies on them.
  if (doc.tokens.empty()) throw ValidationError("token_count", "document has no tokens");
  {
    std::size_t cursor = 0;
    for (const auto& s : doc.sentences) {
      if (s.start != cursor || s.end <= s.start) {
        throw ValidationError("sentence_cover", "sentences must be non-empty, sorted and contiguous from 0");
      }
      cursor = s.end;
    }
    if (cursor != doc.tokens.size()) {
      throw ValidationError("sentence_cover", "sentences must cover every token");
    }
  }

  const bool has_gold = j.contains("triggers") || j.contains("arguments") || j.contains("entities") ||
                        j.contains("entity_clusters") || j.contains("event_clusters");
  if (has_gold) {
    Annotations gold;
    if (auto it = j.find("triggers"); it != j.end()) {
      for (const auto& t : r.array(*it, "triggers")) {
        gold.triggers.push_back({r.index(r.get(t, "token"), "triggers.token"), r.string(r.get(t, "type"), "triggers.type")});
      }
    }
    if (auto it = j.find("entities"); it != j.end()) {
      for (const auto& e : r.array(*it, "entities")) {
        EntityMention m;
        const auto start = r.index(r.get(e, "start"), "entities.start");
        const auto end = r.index(r.get(e, "end"), "entities.end");
        m.span = make_span(doc, start, end, "entity");
        m.type = r.string(r.get(e, "type"), "entities.type");
        try {
          m.level = mention_level_from_string(r.string(r.get(e, "level"), "entities.level"));
        } catch (const std::invalid_argument& ex) {
          throw ParseError(line_no, "entities.level", ex.what());
        }
        gold.entities.push_back(std::move(m));
      }
    }
    if (auto it = j.find("arguments"); it != j.end()) {
      for (const auto& a : r.array(*it, "arguments")) {
        Argument arg;
        arg.trigger = r.index(r.get(a, "trigger"), "arguments.trigger");
        arg.span = make_span(doc, r.index(r.get(a, "start"), "arguments.start"),
                             r.index(r.get(a, "end"), "arguments.end"), "argument");
        arg.role = r.string(r.get(a, "role"), "arguments.role");
        gold.arguments.push_back(std::move(arg));
      }
    }
    if (auto it = j.find("entity_clusters"); it != j.end()) gold.entity_clusters = r.clusters(*it, "entity_clusters");
    if (auto it = j.find("event_clusters"); it != j.end()) gold.event_clusters = r.clusters(*it, "event_clusters");
    doc.gold = std::move(gold);
  }

  normalize_and_validate(doc);
  return doc;
}

std::string serialize_document(const Document& doc) {
  ordered_json j;
  j["doc_id"] = doc.doc_id;
  j["tokens"] = doc.tokens;
  auto sentences = ordered_json::array();
  for (const auto& s : doc.sentences) sentences.push_back({s.start, s.end});
  j["sentences"] = std::move(sentences);
  if (doc.gold) {
    const auto& g = *doc.gold;
    auto triggers = ordered_json::array();
    for (const auto& t : g.triggers) triggers.push_back({{"token", t.token}, {"type", t.type}});
    auto arguments = ordered_json::array();
    for (const auto& a : g.arguments) {
      arguments.push_back({{"trigger", a.trigger}, {"start", a.span.start}, {"end", a.span.end}, {"role", a.role}});
    }
    auto entities = ordered_json::array();
    for (const auto& e : g.entities) {
      entities.push_back({{"start", e.span.start}, {"end", e.span.end}, {"type", e.type}, {"level", to_string(e.level)}});
    }
    j["triggers"] = std::move(triggers);
    j["arguments"] = std::move(arguments);
    j["entities"] = std::move(entities);
    j["entity_clusters"] = g.entity_clusters;
    j["event_clusters"] = g.event_clusters;
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void normalize_clusters(ClusterSet& clusters, std::size_t pool) {
  std::vector<bool> seen(pool, false);
  for (auto& c : clusters) {
    std::sort(c.begin(), c.end());
    for (auto m : c) {
      if (m < pool) seen[m] = true;
    }
  }
  std::erase_if(clusters, [](const auto& c) { return c.empty(); });
  for (std::size_t m = 0; m < pool; ++m) {
    if (!seen[m]) clusters.push_back({m});
  }
  std::sort(clusters.begin(), clusters.end());
}

void check_partition(const ClusterSet& clusters, std::size_t pool, const char* name) {
  std::vector<int> count(pool, 0);
  for (const auto& c : clusters) {
    if (c.empty()) throw ValidationError("cluster_nonempty", std::string(name) + " contains an empty cluster");
    for (auto m : c) {
      if (m >= pool) {
        throw ValidationError("cluster_member", std::string(name) + " references mention " + std::to_string(m) +
                                                    " outside its pool of " + std::to_string(pool));
      }
      if (++count[m] > 1) {
        throw ValidationError("cluster_disjoint", std::string(name) + " places mention " + std::to_string(m) +
                                                      " in more than one cluster");
      }
    }
  }
  for (std::size_t m = 0; m < pool; ++m) {
    if (count[m] == 0) {
      throw ValidationError("cluster_cover", std::string(name) + " misses mention " + std::to_string(m));
    }
  }
}

}  // namespace

void normalize_and_validate(Document& doc) {
  if (doc.gold) {
    normalize_clusters(doc.gold->entity_clusters, doc.gold->entities.size());
    normalize_clusters(doc.gold->event_clusters, doc.gold->triggers.size());
  }
  validate(doc);
}

void validate(const Document& doc) {
  const std::size_t n = doc.token_count();
  if (n == 0) throw ValidationError("token_count", "document has no tokens");
  std::size_t cursor = 0;
  for (const auto& s : doc.sentences) {
    if (s.start != cursor || s.end <= s.start) {
      throw ValidationError("sentence_cover", "sentences must be non-empty, sorted and contiguous from 0");
    }
    cursor = s.end;
  }
  if (cursor != n) throw ValidationError("sentence_cover", "sentences must cover every token");
  if (!doc.gold) return;

  const auto& g = *doc.gold;
  auto check_span = [&](const Span& sp, const char* what) {
    if (sp.start > sp.end) throw ValidationError("span_order", std::string(what) + ": start > end");
    if (sp.end >= n) throw ValidationError("span_in_document", std::string(what) + ": end past last token");
    const auto s = doc.sentence_of(sp.start);
    if (sp.end >= doc.sentences[s].end || sp.sentence != s) {
      throw ValidationError("span_in_sentence", std::string(what) + ": span crosses a sentence boundary");
    }
  };

  std::set<std::size_t> trigger_tokens;
  for (const auto& t : g.triggers) {
    if (t.token >= n) throw ValidationError("trigger_in_document", "trigger token past last token");
    if (t.type.empty() || t.type == TypeInventory::kNullType) {
      throw ValidationError("trigger_type", "trigger at token " + std::to_string(t.token) + " has NULL type");
    }
    if (!trigger_tokens.insert(t.token).second) {
      throw ValidationError("trigger_unique", "two triggers on token " + std::to_string(t.token));
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> entity_spans;
  for (const auto& e : g.entities) {
    check_span(e.span, "entity");
    if (!entity_spans.insert({e.span.start, e.span.end}).second) {
      throw ValidationError("entity_unique", "duplicate entity span [" + std::to_string(e.span.start) + "," +
                                                 std::to_string(e.span.end) + "]");
    }
  }

  for (const auto& a : g.arguments) {
    check_span(a.span, "argument");
    if (!trigger_tokens.contains(a.trigger)) {
      throw ValidationError("argument_trigger", "argument attached to token " + std::to_string(a.trigger) +
                                                    " which is not a trigger");
    }
    if (!entity_spans.contains({a.span.start, a.span.end})) {
      throw ValidationError("argument_entity", "argument span [" + std::to_string(a.span.start) + "," +
                                                   std::to_string(a.span.end) + "] is not an entity mention");
    }
  }

  check_partition(g.entity_clusters, g.entities.size(), "entity_clusters");
  check_partition(g.event_clusters, g.triggers.size(), "event_clusters");
  for (const auto& c : g.event_clusters) {
    for (auto m : c) {
      if (g.triggers[m].type != g.triggers[c.front()].type) {
        throw ValidationError("event_cluster_type", "event cluster mixes types '" + g.triggers[c.front()].type +
                                                        "' and '" + g.triggers[m].type + "'");
      }
    }
  }
}

void validate_against(const Document& doc, const TypeInventory& types) {
  validate(doc);
  if (!doc.gold) return;
  try {
    for (const auto& t : doc.gold->triggers) types.event_index(t.type);
    for (const auto& e : doc.gold->entities) {
      types.entity_index(e.type);
      if (e.span.width() > types.k_max) throw ValidationError("span_width", "entity span wider than k_max");
    }
    for (const auto& a : doc.gold->arguments) types.role_index(a.role);
  } catch (const std::invalid_argument& e) {
    throw ValidationError("inventory_label", e.what());
  }
}

// ---------------------------------------------------------------------------

std::vector<Span> enumerate_spans(std::span<const SentenceBounds> sentences, std::size_t k_max) {
  std::vector<Span> spans;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& b = sentences[s];
    for (std::size_t start = b.start; start < b.end; ++start) {
      const std::size_t last = std::min(b.end, start + k_max);
      for (std::size_t end = start; end < last; ++end) spans.push_back({start, end, s});
    }
  }
  return spans;
}

std::vector<Span> enumerate_spans(const Document& doc, std::size_t k_max) {
  return enumerate_spans(std::span<const SentenceBounds>(doc.sentences), k_max);
}

ClusterSet clusters_from_antecedents(const std::vector<std::optional<std::size_t>>& links) {
  const std::size_t n = links.size();
  // Links point backwards, so a single forward pass resolves each root.
  std::vector<std::size_t> root(n);
  for (std::size_t m = 0; m < n; ++m) {
    if (!links[m]) {
      root[m] = m;
      continue;
    }
    if (*links[m] >= m) {
      throw std::invalid_argument("antecedent link " + std::to_string(m) + " -> " + std::to_string(*links[m]) +
                                  " does not point backwards");
    }
    root[m] = root[*links[m]];
  }
  ClusterSet clusters;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t m = 0; m < n; ++m) {
    if (slot[root[m]] == n) {
      slot[root[m]] = clusters.size();
      clusters.emplace_back();
    }
    clusters[slot[root[m]]].push_back(m);
  }
  return clusters;
}

std::vector<Document> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    docs.push_back(parse_document(line, line_no));
  }
  return docs;
}

void write_corpus(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus '" + path + "'");
  for (const auto& d : docs) out << serialize_document(d) << '\n';
}

}  // namespace dvnee
