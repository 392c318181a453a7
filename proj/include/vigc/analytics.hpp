#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vigc/backend.hpp"
#include "vigc/kernels.hpp"
#include "vigc/types.hpp"

namespace vigc {

// ---------------------------------------------------------------------------
// Dataset statistics

enum class DistanceMethod { ExactAllPairs, Sampled };

struct StatsOptions {
  std::size_t sample_cap = 2000;
  std::uint64_t seed = 0;
  std::size_t prefix_tokens = 3;
};

struct StatsReport {
  std::size_t record_count = 0;  // records with a question/answer pair
  std::size_t unique_instances = 0;
  double avg_q_len = 0.0;
  double avg_a_len = 0.0;
  std::optional<double> mean_q_distance;  // set only with >= 2 questions
  DistanceMethod distance_method = DistanceMethod::ExactAllPairs;
  std::size_t distance_sample_size = 0;
  std::uint64_t distance_seed = 0;
  std::string embedder;
  std::string length_unit = "whitespace tokens after ASCII punctuation removal";
  // Sorted by descending count, then prefix.
  std::vector<std::pair<std::string, std::size_t>> prefix_distribution;
};

/// Mean of (1 - cosine) over all unordered pairs of unit rows; nullopt for
/// fewer than two rows.
std::optional<double> mean_pairwise_distance(const kernels::Matrix& unit_rows);

/// Statistics over records that carry a pair (VigOnly or Corrected). Questions
/// are lowercased and punctuation-stripped before embedding. With more than
/// sample_cap questions the distance runs over a uniform sample of sample_cap
/// of them drawn with options.seed. Embedder errors surface as
/// Error(EmbedderFailure).
StatsReport compute_stats(std::span<const GenerationRecord> records, EmbeddingBackend& embedder,
                          const StatsOptions& options = {});

nlohmann::ordered_json stats_to_json(const StatsReport& report);
std::string stats_table(std::span<const std::pair<std::string, StatsReport>> rows);

// ---------------------------------------------------------------------------
// Hallucination audit

/// Object nouns the audit knows about, with a synonym map onto them. Terms may
/// span several words ("traffic light").
class NounLexicon {
 public:
  NounLexicon() = default;
  NounLexicon(std::set<std::string> terms, std::map<std::string, std::string> synonyms);

  /// The 80 COCO category names with a shipped synonym map.
  static NounLexicon coco_default();
  /// Newline-delimited terms; '#' starts a comment line. No synonyms.
  static NounLexicon load(const std::filesystem::path& path);

  /// Adds or overrides synonyms.
  void add_synonyms(const std::map<std::string, std::string>& synonyms);

  /// Canonical lexicon term for a lowercased phrase: synonym lookup, direct
  /// membership, then a retry with one trailing 's' removed.
  std::optional<std::string> canonicalize(std::string_view phrase) const;

  bool empty() const noexcept { return terms_.empty(); }
  std::size_t max_words() const noexcept { return max_words_; }
  const std::set<std::string>& terms() const noexcept { return terms_; }

 private:
  std::set<std::string> terms_;
  std::map<std::string, std::string> synonyms_;
  std::size_t max_words_ = 1;
};

struct AnnotationSet {
  std::map<std::string, std::set<std::string>> images;
  std::map<std::string, std::string> synonyms;

  /// {"synonyms": {term: canonical}, "images": {image_id: [terms]}}.
  static AnnotationSet from_json(const nlohmann::json& doc);
  static AnnotationSet load(const std::filesystem::path& path);
};

enum class AnswerField { Vig, Vic };

struct AnswerAudit {
  std::size_t sentence_count = 0;
  std::vector<std::size_t> hallucinated_sentences;  // 0-based indices
  std::vector<std::string> hallucinated_terms;      // canonical, in order of mention
  std::size_t first_half = 0;
  std::size_t second_half = 0;
};

/// Sentence i of n belongs to the first half iff i < ceil(n / 2).
AnswerAudit audit_answer(std::string_view answer, const std::set<std::string>& permitted, const NounLexicon& lexicon);

struct RecordAudit {
  std::string image_id;
  int template_id = 0;
  AnswerAudit audit;
};

struct HallucinationReport {
  std::size_t records_audited = 0;
  std::size_t records_skipped = 0;  // no answer in the selected field
  std::size_t hallucination_count = 0;
  std::size_t first_half = 0;
  std::size_t second_half = 0;
  std::size_t hallucinated_words = 0;
  std::vector<RecordAudit> details;
};

/// Throws Error(MissingAnnotation) naming the first uncovered image and
/// Error(EmptyLexicon).
HallucinationReport audit_hallucinations(std::span<const GenerationRecord> records, const AnnotationSet& annotations,
                                         const NounLexicon& lexicon, AnswerField field);

nlohmann::ordered_json hallucination_to_json(const HallucinationReport& report);
/// Model | H. Count | 1st 50% | 2nd 50% | H. Word
std::string hallucination_table(std::span<const std::pair<std::string, HallucinationReport>> rows);

// ---------------------------------------------------------------------------
// Relative judging

struct JudgeItem {
  std::string category;
  std::string question;
  std::string context;
  std::string reference;
  std::string candidate;
};

struct JudgedItem {
  std::string category;
  double ref_score = 0.0;
  double cand_score = 0.0;
  std::string rationale;
};

struct RelativeScores {
  std::map<std::string, double> per_category;
  double overall = 0.0;
};

/// 100 * sum(candidate) / sum(reference), per category and overall.
/// Throws Error(EmptyCategory) on no items, Error(InvalidArgument) for scores
/// outside [1, 10].
RelativeScores relative_score(std::span<const JudgedItem> items);

std::vector<JudgeItem> load_judge_items(const std::filesystem::path& path);

/// Judges every item, preserving order.
std::vector<JudgedItem> run_judging(std::span<const JudgeItem> items, JudgeBackend& judge, int max_in_flight = 1);

nlohmann::ordered_json relative_scores_to_json(const RelativeScores& scores, std::span<const JudgedItem> items);

}  // namespace vigc
