#include "railtrace/trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace railtrace {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Minimal CSV record split: comma separated, optional double quotes with ""
// as an escaped quote.
std::vector<std::string> split_csv(std::string_view line, std::size_t line_number) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw TraceError("line " + std::to_string(line_number) + ": unterminated quote");
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"#") == std::string::npos && s == trim(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

nlohmann::json to_json(const DocumentAnchor& a) {
  return {{"id", a.id}, {"document", a.document_id}, {"title", a.section_title}, {"page", a.page}, {"locator", a.locator}};
}

// --- DocumentIndex ---------------------------------------------------------

void DocumentIndex::add(Document doc) {
  for (auto& s : doc.sections) {
    s.document_id = doc.id;
    if (by_id_.count(s.id)) throw TraceError("duplicate anchor id '" + s.id + "'");
  }
  std::size_t d = documents_.size();
  for (std::size_t i = 0; i < doc.sections.size(); ++i) by_id_[doc.sections[i].id] = {d, i};
  documents_.push_back(std::move(doc));
}

const DocumentAnchor* DocumentIndex::find(const std::string& anchor_id) const {
  auto it = by_id_.find(anchor_id);
  if (it == by_id_.end()) return nullptr;
  return &documents_[it->second.first].sections[it->second.second];
}

std::vector<const DocumentAnchor*> DocumentIndex::anchors() const {
  std::vector<const DocumentAnchor*> out;
  for (const auto& [id, pos] : by_id_) out.push_back(&documents_[pos.first].sections[pos.second]);
  return out;
}

DocumentIndex DocumentIndex::from_json(const nlohmann::json& j) {
  DocumentIndex index;
  try {
    for (const auto& d : j.at("documents")) {
      Document doc;
      doc.id = d.at("id").get<std::string>();
      doc.title = d.value("title", "");
      for (const auto& s : d.at("sections")) {
        DocumentAnchor a;
        a.id = s.at("anchor").get<std::string>();
        a.section_title = s.value("title", "");
        a.page = s.value("page", 0);
        a.locator = s.value("locator", "");
        doc.sections.push_back(std::move(a));
      }
      index.add(std::move(doc));
    }
  } catch (const nlohmann::json::exception& e) {
    throw TraceError(std::string("document index: ") + e.what());
  }
  return index;
}

DocumentIndex DocumentIndex::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw TraceError(path.string() + ": " + e.what());
  }
}

nlohmann::json DocumentIndex::to_json() const {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : documents_) {
    nlohmann::json sections = nlohmann::json::array();
    for (const auto& s : d.sections)
      sections.push_back({{"anchor", s.id}, {"title", s.section_title}, {"page", s.page}, {"locator", s.locator}});
    docs.push_back({{"id", d.id}, {"title", d.title}, {"sections", sections}});
  }
  return {{"format_version", 1}, {"documents", docs}};
}

// --- TraceMatrix -----------------------------------------------------------

void TraceMatrix::add(MatrixRow row) {
  if (!seen_.insert(row).second)
    throw TraceError("duplicate matrix row (" + row.concept_name + ", " + row.anchor_id + ")");
  rows_.push_back(std::move(row));
}

TraceMatrix TraceMatrix::parse_csv(const std::string& text, const DocumentIndex& index) {
  TraceMatrix m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_number;
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split_csv(t, line_number);
    if (!header) {
      if (fields != std::vector<std::string>{"concept", "anchor_id"})
        throw TraceError("line " + std::to_string(line_number) + ": expected header 'concept,anchor_id'");
      header = true;
      continue;
    }
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw TraceError("line " + std::to_string(line_number) + ": expected 'concept,anchor_id'");
    if (!index.find(fields[1]))
      throw TraceError("line " + std::to_string(line_number) + ": unknown anchor '" + fields[1] + "'");
    try {
      m.add({fields[0], fields[1]});
    } catch (const TraceError& e) {
      throw TraceError("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  if (!header) throw TraceError("missing header 'concept,anchor_id'");
  return m;
}

TraceMatrix TraceMatrix::load(const std::filesystem::path& path, const DocumentIndex& index) {
  try {
    return parse_csv(read_text(path), index);
  } catch (const TraceError& e) {
    throw TraceError(path.string() + ": " + e.what());
  }
}

std::string TraceMatrix::to_csv() const {
  std::string out = "concept,anchor_id\n";
  for (const auto& r : rows_) out += csv_field(r.concept_name) + "," + csv_field(r.anchor_id) + "\n";
  return out;
}

std::vector<std::string> TraceMatrix::anchors_for(const std::string& concept_name) const {
  std::set<std::string> out;
  for (const auto& r : rows_)
    if (r.concept_name == concept_name) out.insert(r.anchor_id);
  return {out.begin(), out.end()};
}

bool TraceMatrix::has_concept(const std::string& concept_name) const {
  return std::any_of(rows_.begin(), rows_.end(), [&](const MatrixRow& r) { return r.concept_name == concept_name; });
}

// --- TraceRegistry ---------------------------------------------------------

TraceRegistry::TraceRegistry(DocumentIndex index, TraceMatrix matrix)
    : index_(std::move(index)), matrix_(std::move(matrix)) {}

void TraceRegistry::register_rule(RuleRegistration reg) {
  RuleId id = reg.rule;
  if (!rules_.emplace(id, std::move(reg)).second) throw TraceError("rule registered twice: " + id.value);
}

void TraceRegistry::register_element(ElementId element, std::string declaration, int line, ElementTags tags) {
  CreationSite site{element, std::move(declaration), line};
  elements_[element] = ElementEntry{std::move(site), std::move(tags)};
}

void TraceRegistry::clear_elements() { elements_.clear(); }

const RuleRegistration* TraceRegistry::find_rule(const RuleId& rule) const {
  auto it = rules_.find(rule);
  return it == rules_.end() ? nullptr : &it->second;
}

std::set<std::string> TraceRegistry::resolve(const std::vector<std::string>& concepts,
                                             const std::vector<std::string>& anchors) const {
  std::set<std::string> out;
  for (const auto& a : anchors)
    if (index_.find(a)) out.insert(a);
  for (const auto& c : concepts)
    for (auto& a : matrix_.anchors_for(c)) out.insert(std::move(a));
  return out;
}

std::vector<TraceTarget> TraceRegistry::forward_trace(const std::string& anchor_id) const {
  if (!index_.find(anchor_id)) throw TraceError("unknown anchor '" + anchor_id + "'");
  std::vector<TraceTarget> out;
  for (const auto& [id, reg] : rules_)
    if (resolve(reg.concepts, reg.anchors).count(anchor_id)) out.emplace_back(id);
  for (const auto& [id, entry] : elements_)
    if (resolve(entry.tags.concepts, entry.tags.documents).count(anchor_id)) out.emplace_back(entry.site);
  return out;
}

BackwardTrace TraceRegistry::backward_trace(const RuleId& rule) const {
  const RuleRegistration* reg = find_rule(rule);
  if (!reg) throw TraceError("unknown rule '" + rule.value + "'");
  BackwardTrace out;
  for (const auto& a : resolve(reg->concepts, reg->anchors)) out.anchors.push_back(*index_.find(a));
  if (reg->concepts.empty() && reg->anchors.empty())
    out.warnings.push_back("rule " + rule.value + " has no trace annotations");
  for (const auto& c : reg->concepts)
    if (!matrix_.has_concept(c)) out.warnings.push_back("concept '" + c + "' is not in the trace matrix");
  for (const auto& a : reg->anchors)
    if (!index_.find(a)) out.warnings.push_back("anchor '" + a + "' is not in the document index");
  return out;
}

std::vector<DocumentAnchor> TraceRegistry::concept_lookup(const std::string& concept_name) const {
  std::vector<DocumentAnchor> out;
  for (const auto& a : matrix_.anchors_for(concept_name)) out.push_back(*index_.find(a));
  return out;
}

CreationSite TraceRegistry::element_trace(const ElementId& element) const {
  auto it = elements_.find(element);
  if (it == elements_.end()) throw TraceError("no creation site for " + element.value);
  return it->second.site;
}

ElementId TraceRegistry::site_trace(int line) const {
  for (const auto& [id, entry] : elements_)
    if (entry.site.line == line) return id;
  throw TraceError("no element declared at line " + std::to_string(line));
}

ElementId TraceRegistry::site_trace(const std::string& declaration) const {
  for (const auto& [id, entry] : elements_)
    if (entry.site.declaration == declaration) return id;
  throw TraceError("no element declared as '" + declaration + "'");
}

MessageAnchors TraceRegistry::msg_anchors(const SimEvent& event) const {
  MessageAnchors out;
  const auto* msg = std::get_if<Message>(&event.payload);
  if (!msg) return out;
  for (const auto& a : msg->anchors) {
    if (const DocumentAnchor* d = index_.find(a))
      out.anchors.push_back(*d);
    else
      out.unresolved.push_back(a);
  }
  return out;
}

CoverageReport TraceRegistry::coverage_report() const {
  CoverageReport r;
  std::set<std::string> covered;
  std::set<std::string> unresolved;
  std::set<std::string> unmapped;
  auto scan = [&](const std::vector<std::string>& concepts, const std::vector<std::string>& anchors) {
    for (const auto& a : resolve(concepts, anchors)) covered.insert(a);
    for (const auto& a : anchors)
      if (!index_.find(a)) unresolved.insert(a);
    for (const auto& c : concepts)
      if (!matrix_.has_concept(c)) unmapped.insert(c);
  };
  for (const auto& [id, reg] : rules_) {
    scan(reg.concepts, reg.anchors);
    if (!reg.infrastructure && resolve(reg.concepts, reg.anchors).empty()) r.untraced_rules.push_back(id.value);
  }
  for (const auto& [id, entry] : elements_) scan(entry.tags.concepts, entry.tags.documents);

  for (const auto* a : index_.anchors()) {
    auto& count = r.per_document[a->document_id];
    ++count.anchors;
    if (covered.count(a->id))
      ++count.covered;
    else
      r.uncovered_anchors.push_back(a->id);
  }
  r.unresolved_anchor_ids.assign(unresolved.begin(), unresolved.end());
  r.unmapped_concepts.assign(unmapped.begin(), unmapped.end());
  return r;
}

nlohmann::json CoverageReport::to_json() const {
  nlohmann::json docs = nlohmann::json::object();
  for (const auto& [id, c] : per_document) docs[id] = {{"anchors", c.anchors}, {"covered", c.covered}};
  return {{"uncovered_anchors", uncovered_anchors},
          {"untraced_rules", untraced_rules},
          {"unresolved_anchor_ids", unresolved_anchor_ids},
          {"unmapped_concepts", unmapped_concepts},
          {"per_document", docs}};
}

std::string CoverageReport::to_text() const {
  std::ostringstream os;
  auto list = [&](const char* title, const std::vector<std::string>& items) {
    os << title << ": " << items.size() << "\n";
    for (const auto& i : items) os << "  " << i << "\n";
  };
  list("uncovered anchors", uncovered_anchors);
  list("rules without trace", untraced_rules);
  list("unresolved anchor ids", unresolved_anchor_ids);
  list("concepts missing from matrix", unmapped_concepts);
  os << "per document:\n";
  for (const auto& [id, c] : per_document) os << "  " << id << " " << c.covered << "/" << c.anchors << "\n";
  return os.str();
}

// --- queries ---------------------------------------------------------------

nlohmann::json concept_query(const TraceRegistry& registry, const std::string& concept_name) {
  if (!registry.matrix().has_concept(concept_name)) throw TraceError("unknown concept '" + concept_name + "'");
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : registry.concept_lookup(concept_name)) anchors.push_back(to_json(a));
  return {{"concept", concept_name}, {"anchors", anchors}};
}

nlohmann::json anchor_query(const TraceRegistry& registry, const std::string& anchor_id) {
  auto targets = registry.forward_trace(anchor_id);
  nlohmann::json rules = nlohmann::json::array();
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& t : targets) {
    if (const auto* rule = std::get_if<RuleId>(&t))
      rules.push_back(rule->value);
    else {
      const auto& site = std::get<CreationSite>(t);
      sites.push_back({{"element", site.element.value}, {"declaration", site.declaration}, {"line", site.line}});
    }
  }
  return {{"anchor", to_json(*registry.documents().find(anchor_id))}, {"rules", rules}, {"sites", sites}};
}

nlohmann::json rule_query(const TraceRegistry& registry, const RuleId& rule) {
  BackwardTrace trace = registry.backward_trace(rule);
  const RuleRegistration* reg = registry.find_rule(rule);
  nlohmann::json anchors = nlohmann::json::array();
  for (const auto& a : trace.anchors) anchors.push_back(to_json(a));
  return {{"rule", rule.value},
          {"description", reg->description},
          {"concepts", reg->concepts},
          {"anchors", anchors},
          {"warnings", trace.warnings}};
}

}  // namespace railtrace
