#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "railtrace/eventlog.hpp"
#include "railtrace/ids.hpp"

namespace railtrace {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DocumentAnchor {
  std::string id;
  std::string document_id;
  std::string section_title;
  int page = 0;
  std::string locator;
  friend bool operator==(const DocumentAnchor&, const DocumentAnchor&) = default;
};

struct Document {
  std::string id;
  std::string title;
  std::vector<DocumentAnchor> sections;
};

/// Structured stand-in for the rulebook PDFs: documents -> sections.
class DocumentIndex {
 public:
  static DocumentIndex from_json(const nlohmann::json& j);
  static DocumentIndex load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  void add(Document doc);
  const DocumentAnchor* find(const std::string& anchor_id) const;
  const std::vector<Document>& documents() const { return documents_; }
  /// All anchors sorted by id.
  std::vector<const DocumentAnchor*> anchors() const;

 private:
  std::vector<Document> documents_;
  std::map<std::string, std::pair<std::size_t, std::size_t>> by_id_;
};

struct MatrixRow {
  std::string concept_name;
  std::string anchor_id;
  friend auto operator<=>(const MatrixRow&, const MatrixRow&) = default;
};

/// n-m concept/anchor requirement matrix (`concept,anchor_id` CSV).
class TraceMatrix {
 public:
  /// Rejects exact duplicates and anchors unknown to `index`, naming the
  /// 1-based file line.
  static TraceMatrix parse_csv(const std::string& text, const DocumentIndex& index);
  static TraceMatrix load(const std::filesystem::path& path, const DocumentIndex& index);
  std::string to_csv() const;

  void add(MatrixRow row);  // throws TraceError on exact duplicates
  const std::vector<MatrixRow>& rows() const { return rows_; }
  std::vector<std::string> anchors_for(const std::string& concept_name) const;
  bool has_concept(const std::string& concept_name) const;

 private:
  std::vector<MatrixRow> rows_;
  std::set<MatrixRow> seen_;
};

struct RuleRegistration {
  RuleId rule;
  std::vector<std::string> concepts;
  std::vector<std::string> anchors;
  std::string description;
  /// Basic infrastructure is exempt from the untraced-rule coverage list.
  bool infrastructure = false;
};

/// Where a scenario element is declared: its declaration id and the line of
/// that declaration in the canonical scenario file.
struct CreationSite {
  ElementId element;
  std::string declaration;
  int line = 0;
  friend bool operator==(const CreationSite&, const CreationSite&) = default;
};

struct ElementTags {
  std::vector<std::string> concepts;
  std::vector<std::string> documents;
};

using TraceTarget = std::variant<RuleId, CreationSite>;

struct BackwardTrace {
  std::vector<DocumentAnchor> anchors;
  std::vector<std::string> warnings;
};

struct MessageAnchors {
  std::vector<DocumentAnchor> anchors;
  std::vector<std::string> unresolved;
};

struct CoverageReport {
  std::vector<std::string> uncovered_anchors;
  std::vector<std::string> untraced_rules;
  std::vector<std::string> unresolved_anchor_ids;
  std::vector<std::string> unmapped_concepts;
  struct DocumentCount {
    std::size_t anchors = 0;
    std::size_t covered = 0;
  };
  std::map<std::string, DocumentCount> per_document;

  bool fully_linked() const {
    return uncovered_anchors.empty() && untraced_rules.empty() && unresolved_anchor_ids.empty() &&
           unmapped_concepts.empty();
  }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Links document sections, concepts, rule handlers and scenario creation
/// sites. Queries return results in stable sorted order.
class TraceRegistry {
 public:
  TraceRegistry() = default;
  TraceRegistry(DocumentIndex index, TraceMatrix matrix);

  void register_rule(RuleRegistration reg);  // throws TraceError if registered twice
  void register_element(ElementId element, std::string declaration, int line, ElementTags tags);
  void clear_elements();

  const DocumentIndex& documents() const { return index_; }
  const TraceMatrix& matrix() const { return matrix_; }
  const std::map<RuleId, RuleRegistration>& rules() const { return rules_; }
  const RuleRegistration* find_rule(const RuleId& rule) const;

  /// Rules then creation sites that realize the anchor, directly or via a
  /// concept row. Throws TraceError for unknown anchors.
  std::vector<TraceTarget> forward_trace(const std::string& anchor_id) const;
  /// Throws TraceError for unregistered rules.
  BackwardTrace backward_trace(const RuleId& rule) const;
  std::vector<DocumentAnchor> concept_lookup(const std::string& concept_name) const;

  CreationSite element_trace(const ElementId& element) const;
  ElementId site_trace(int line) const;
  ElementId site_trace(const std::string& declaration) const;

  MessageAnchors msg_anchors(const SimEvent& event) const;
  CoverageReport coverage_report() const;

 private:
  struct ElementEntry {
    CreationSite site;
    ElementTags tags;
  };
  std::set<std::string> resolve(const std::vector<std::string>& concepts, const std::vector<std::string>& anchors) const;

  DocumentIndex index_;
  TraceMatrix matrix_;
  std::map<RuleId, RuleRegistration> rules_;
  std::map<ElementId, ElementEntry> elements_;
};

nlohmann::json to_json(const DocumentAnchor& anchor);

// JSON answers shared by the CLI and the HTTP service. Each throws TraceError
// for an unknown concept, anchor or rule.
nlohmann::json concept_query(const TraceRegistry& registry, const std::string& concept_name);
nlohmann::json anchor_query(const TraceRegistry& registry, const std::string& anchor_id);
nlohmann::json rule_query(const TraceRegistry& registry, const RuleId& rule);

}  // namespace railtrace
