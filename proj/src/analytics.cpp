#include "vigc/analytics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vigc/dataset.hpp"
#include "vigc/error.hpp"
#include "vigc/rng.hpp"
#include "vigc/text.hpp"
#include "vigc/worker_pool.hpp"

namespace vigc {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Columns after the first are right-aligned; two spaces between columns.
std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      const auto pad = std::string(width[c] - row[c].size(), ' ');
      line += c == 0 ? row[c] + pad : pad + row[c];
    }
    out += trim_right(line) + '\n';
  }
  return out;
}

std::vector<const GenerationRecord*> records_with_pairs(std::span<const GenerationRecord> records) {
  std::vector<const GenerationRecord*> out;
  for (const auto& r : records) {
    if (r.vig_pair && (r.status == RecordStatus::VigOnly || r.status == RecordStatus::Corrected)) out.push_back(&r);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::optional<double> mean_pairwise_distance(const kernels::Matrix& unit_rows) {
  if (unit_rows.rows < 2) return std::nullopt;
  const double pairs = static_cast<double>(unit_rows.rows) * static_cast<double>(unit_rows.rows - 1) / 2.0;
  return kernels::pairwise_distance_sum_omp(unit_rows) / pairs;
}

StatsReport compute_stats(std::span<const GenerationRecord> records, EmbeddingBackend& embedder,
                          const StatsOptions& options) {
  StatsReport report;
  report.embedder = embedder.name();
  auto usable = records_with_pairs(records);
  report.record_count = usable.size();

  std::vector<GenerationRecord> copies;
  copies.reserve(usable.size());
  for (const auto* r : usable) copies.push_back(*r);
  report.unique_instances = dedup_records(copies).size();

  std::vector<std::string> questions;
  questions.reserve(usable.size());
  std::map<std::string, std::size_t> prefixes;
  double q_tokens = 0.0, a_tokens = 0.0;
  for (const auto* r : usable) {
    q_tokens += static_cast<double>(token_count(r->vig_pair->question));
    a_tokens += static_cast<double>(token_count(r->final_answer()));
    auto tokens = normalized_tokens(r->vig_pair->question);
    if (tokens.size() > options.prefix_tokens) tokens.resize(options.prefix_tokens);
    ++prefixes[join(tokens, " ")];
    questions.push_back(normalize_for_matching(r->vig_pair->question));
  }
  if (!usable.empty()) {
    report.avg_q_len = q_tokens / static_cast<double>(usable.size());
    report.avg_a_len = a_tokens / static_cast<double>(usable.size());
  }
  report.prefix_distribution.assign(prefixes.begin(), prefixes.end());
  std::stable_sort(report.prefix_distribution.begin(), report.prefix_distribution.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  if (questions.size() > options.sample_cap && options.sample_cap >= 2) {
    // Partial Fisher-Yates: the first sample_cap slots become the sample.
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.sample_cap; ++i) {
      auto j = i + rng.uniform_index(questions.size() - i);
      std::swap(questions[i], questions[j]);
    }
    questions.resize(options.sample_cap);
    report.distance_method = DistanceMethod::Sampled;
    report.distance_seed = options.seed;
  }
  report.distance_sample_size = questions.size();

  if (questions.size() >= 2) {
    std::vector<std::vector<double>> vectors;
    try {
      vectors = embedder.embed(questions);
    } catch (const Error& e) {
      throw Error(ErrorCode::EmbedderFailure, e.what());
    }
    if (vectors.size() != questions.size()) throw Error(ErrorCode::EmbedderFailure, "embedder returned wrong count");
    report.mean_q_distance = mean_pairwise_distance(kernels::from_rows(vectors));
  }
  return report;
}

ordered_json stats_to_json(const StatsReport& r) {
  ordered_json j;
  j["record_count"] = r.record_count;
  j["unique_instances"] = r.unique_instances;
  j["avg_q_len"] = r.avg_q_len;
  j["avg_a_len"] = r.avg_a_len;
  j["length_unit"] = r.length_unit;
  j["mean_q_distance"] = r.mean_q_distance ? ordered_json(*r.mean_q_distance) : ordered_json(nullptr);
  ordered_json method;
  if (r.distance_method == DistanceMethod::ExactAllPairs) {
    method["kind"] = "exact_all_pairs";
    method["n"] = r.distance_sample_size;
  } else {
    method["kind"] = "sampled";
    method["n"] = r.distance_sample_size;
    method["seed"] = r.distance_seed;
  }
  j["distance_method"] = std::move(method);
  j["embedder"] = r.embedder;
  auto prefixes = ordered_json::array();
  for (const auto& [prefix, count] : r.prefix_distribution) {
    ordered_json p;
    p["prefix"] = prefix;
    p["count"] = count;
    prefixes.push_back(std::move(p));
  }
  j["prefix_distribution"] = std::move(prefixes);
  return j;
}

std::string stats_table(std::span<const std::pair<std::string, StatsReport>> rows) {
  std::vector<std::vector<std::string>> cells{{"Dataset", "unique instance", "Avg. length (Q/A)", "Mean Q distance"}};
  for (const auto& [label, r] : rows) {
    cells.push_back({label, std::to_string(r.unique_instances), fixed(r.avg_q_len, 1) + "/" + fixed(r.avg_a_len, 1),
                     r.mean_q_distance ? fixed(*r.mean_q_distance, 3) : "-"});
  }
  return render_table(cells);
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kCocoCategories[] = {
    "person",        "bicycle",      "car",           "motorcycle",    "airplane",     "bus",
    "train",         "truck",        "boat",          "traffic light", "fire hydrant", "stop sign",
    "parking meter", "bench",        "bird",          "cat",           "dog",          "horse",
    "sheep",         "cow",          "elephant",      "bear",          "zebra",        "giraffe",
    "backpack",      "umbrella",     "handbag",       "tie",           "suitcase",     "frisbee",
    "skis",          "snowboard",    "sports ball",   "kite",          "baseball bat", "baseball glove",
    "skateboard",    "surfboard",    "tennis racket", "bottle",        "wine glass",   "cup",
    "fork",          "knife",        "spoon",         "bowl",          "banana",       "apple",
    "sandwich",      "orange",       "broccoli",      "carrot",        "hot dog",      "pizza",
    "donut",         "cake",         "chair",         "couch",         "potted plant", "bed",
    "dining table",  "toilet",       "tv",            "laptop",        "mouse",        "remote",
    "keyboard",      "cell phone",   "microwave",     "oven",          "toaster",      "sink",
    "refrigerator",  "book",         "clock",         "vase",          "scissors",     "teddy bear",
    "hair drier",    "toothbrush",
};

const std::map<std::string, std::string>& coco_synonyms() {
  static const std::map<std::string, std::string> synonyms = {
      {"man", "person"},           {"men", "person"},           {"woman", "person"},
      {"women", "person"},         {"people", "person"},        {"boy", "person"},
      {"girl", "person"},          {"child", "person"},         {"children", "person"},
      {"kid", "person"},           {"guy", "person"},           {"lady", "person"},
      {"player", "person"},        {"bike", "bicycle"},         {"motorbike", "motorcycle"},
      {"plane", "airplane"},       {"aeroplane", "airplane"},   {"jet", "airplane"},
      {"automobile", "car"},       {"puppy", "dog"},            {"kitten", "cat"},
      {"cattle", "cow"},           {"ski", "skis"},             {"ball", "sports ball"},
      {"racket", "tennis racket"}, {"doughnut", "donut"},       {"sofa", "couch"},
      {"plant", "potted plant"},   {"table", "dining table"},   {"television", "tv"},
      {"phone", "cell phone"},     {"cellphone", "cell phone"}, {"mobile phone", "cell phone"},
      {"fridge", "refrigerator"},  {"hair dryer", "hair drier"}, {"teddy", "teddy bear"},
  };
  return synonyms;
}

}  // namespace

NounLexicon::NounLexicon(std::set<std::string> terms, std::map<std::string, std::string> synonyms)
    : terms_(std::move(terms)) {
  for (const auto& t : terms_) max_words_ = std::max(max_words_, normalized_tokens(t).size());
  add_synonyms(synonyms);
}

NounLexicon NounLexicon::coco_default() {
  return NounLexicon(std::set<std::string>(std::begin(kCocoCategories), std::end(kCocoCategories)), coco_synonyms());
}

NounLexicon NounLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open lexicon " + path.string());
  std::set<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    terms.insert(normalize_for_matching(t));
  }
  return NounLexicon(std::move(terms), {});
}

void NounLexicon::add_synonyms(const std::map<std::string, std::string>& synonyms) {
  for (const auto& [from, to] : synonyms) {
    auto key = normalize_for_matching(from);
    synonyms_[key] = normalize_for_matching(to);
    max_words_ = std::max(max_words_, normalized_tokens(key).size());
  }
}

std::optional<std::string> NounLexicon::canonicalize(std::string_view phrase) const {
  std::string p(phrase);
  if (auto it = synonyms_.find(p); it != synonyms_.end()) {
    if (terms_.contains(it->second)) return it->second;
    return std::nullopt;
  }
  if (terms_.contains(p)) return p;
  if (p.size() > 1 && p.back() == 's') {
    p.pop_back();
    if (terms_.contains(p) || synonyms_.contains(p)) return canonicalize(p);
  }
  return std::nullopt;
}

AnnotationSet AnnotationSet::from_json(const nlohmann::json& doc) {
  AnnotationSet set;
  try {
    if (doc.contains("synonyms")) {
      for (const auto& [k, v] : doc["synonyms"].items()) set.synonyms[to_lower(k)] = to_lower(v.get<std::string>());
    }
    for (const auto& [id, terms] : doc.at("images").items()) {
      auto& bucket = set.images[id];
      for (const auto& t : terms) {
        auto term = normalize_for_matching(t.get<std::string>());
        if (term.empty()) throw Error(ErrorCode::ParseError, "empty annotation term for image " + id);
        bucket.insert(std::move(term));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("annotation set: ") + e.what());
  }
  return set;
}

AnnotationSet AnnotationSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open annotations " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + " at byte offset " + std::to_string(e.byte));
  }
}

AnswerAudit audit_answer(std::string_view answer, const std::set<std::string>& permitted, const NounLexicon& lexicon) {
  std::set<std::string> allowed;
  for (const auto& t : permitted) allowed.insert(lexicon.canonicalize(t).value_or(t));

  AnswerAudit out;
  auto sentences = split_sentences(answer);
  out.sentence_count = sentences.size();
  const std::size_t midpoint = (sentences.size() + 1) / 2;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto tokens = normalized_tokens(sentences[s]);
    bool hit = false;
    std::size_t i = 0;
    while (i < tokens.size()) {
      std::size_t matched = 0;
      for (std::size_t len = std::min(lexicon.max_words(), tokens.size() - i); len >= 1; --len) {
        std::string phrase = tokens[i];
        for (std::size_t k = 1; k < len; ++k) phrase += " " + tokens[i + k];
        if (auto canon = lexicon.canonicalize(phrase)) {
          matched = len;
          if (!allowed.contains(*canon)) {
            out.hallucinated_terms.push_back(*canon);
            hit = true;
          }
          break;
        }
      }
      i += matched > 0 ? matched : 1;
    }
    if (hit) {
      out.hallucinated_sentences.push_back(s);
      if (s < midpoint) {
        ++out.first_half;
      } else {
        ++out.second_half;
      }
    }
  }
  return out;
}

HallucinationReport audit_hallucinations(std::span<const GenerationRecord> records, const AnnotationSet& annotations,
                                         const NounLexicon& lexicon, AnswerField field) {
  if (lexicon.empty()) throw Error(ErrorCode::EmptyLexicon, "the noun lexicon has no terms");
  NounLexicon effective = lexicon;
  effective.add_synonyms(annotations.synonyms);

  std::vector<const GenerationRecord*> targets;
  std::vector<const std::string*> answers;
  HallucinationReport report;
  for (const auto& r : records) {
    const std::string* answer = nullptr;
    if (field == AnswerField::Vig && r.vig_pair) answer = &r.vig_pair->answer;
    if (field == AnswerField::Vic && r.vic_answer) answer = &*r.vic_answer;
    if (answer == nullptr) {
      ++report.records_skipped;
      continue;
    }
    if (!annotations.images.contains(r.image.image_id)) {
      throw Error(ErrorCode::MissingAnnotation, "no annotation for image " + r.image.image_id);
    }
    targets.push_back(&r);
    answers.push_back(answer);
  }

  report.details.resize(targets.size());
  const auto n = static_cast<std::ptrdiff_t>(targets.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& r = *targets[idx];
    report.details[idx] = {r.image.image_id, r.template_id,
                           audit_answer(*answers[idx], annotations.images.at(r.image.image_id), effective)};
  }

  report.records_audited = targets.size();
  for (const auto& d : report.details) {
    if (!d.audit.hallucinated_terms.empty()) ++report.hallucination_count;
    report.first_half += d.audit.first_half;
    report.second_half += d.audit.second_half;
    report.hallucinated_words += d.audit.hallucinated_terms.size();
  }
  return report;
}

ordered_json hallucination_to_json(const HallucinationReport& r) {
  ordered_json j;
  j["records_audited"] = r.records_audited;
  j["records_skipped"] = r.records_skipped;
  j["hallucination_count"] = r.hallucination_count;
  j["first_half"] = r.first_half;
  j["second_half"] = r.second_half;
  j["hallucinated_words"] = r.hallucinated_words;
  auto details = ordered_json::array();
  for (const auto& d : r.details) {
    if (d.audit.hallucinated_terms.empty()) continue;
    ordered_json e;
    e["image_id"] = d.image_id;
    e["template_id"] = d.template_id;
    e["sentences"] = d.audit.sentence_count;
    e["hallucinated_sentences"] = d.audit.hallucinated_sentences;
    e["hallucinated_terms"] = d.audit.hallucinated_terms;
    details.push_back(std::move(e));
  }
  j["per_record"] = std::move(details);
  return j;
}

std::string hallucination_table(std::span<const std::pair<std::string, HallucinationReport>> rows) {
  std::vector<std::vector<std::string>> cells{{"Model", "H. Count", "1st 50%", "2nd 50%", "H. Word"}};
  for (const auto& [label, r] : rows) {
    cells.push_back({label, std::to_string(r.hallucination_count), std::to_string(r.first_half),
                     std::to_string(r.second_half), std::to_string(r.hallucinated_words)});
  }
  return render_table(cells);
}

// ---------------------------------------------------------------------------

RelativeScores relative_score(std::span<const JudgedItem> items) {
  if (items.empty()) throw Error(ErrorCode::EmptyCategory, "no judged items");
  std::map<std::string, std::pair<double, double>> sums;
  double ref_total = 0.0, cand_total = 0.0;
  for (const auto& item : items) {
    for (double s : {item.ref_score, item.cand_score}) {
      if (!(s >= 1.0 && s <= 10.0)) {
        throw Error(ErrorCode::InvalidArgument, "score " + fixed(s, 3) + " outside [1,10] in " + item.category);
      }
    }
    auto& [ref, cand] = sums[item.category];
    ref += item.ref_score;
    cand += item.cand_score;
    ref_total += item.ref_score;
    cand_total += item.cand_score;
  }
  RelativeScores out;
  for (const auto& [category, s] : sums) out.per_category[category] = 100.0 * s.second / s.first;
  out.overall = 100.0 * cand_total / ref_total;
  return out;
}

std::vector<JudgeItem> load_judge_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<JudgeItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      auto j = nlohmann::json::parse(line);
      items.push_back({j.at("category").get<std::string>(), j.at("question").get<std::string>(),
                       j.value("context", ""), j.at("reference").get<std::string>(),
                       j.at("candidate").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

std::vector<JudgedItem> run_judging(std::span<const JudgeItem> items, JudgeBackend& judge, int max_in_flight) {
  std::vector<JudgedItem> out(items.size());
  run_indexed(
      items.size(), max_in_flight,
      [&](std::size_t i) {
        const auto& it = items[i];
        auto j = judge.judge(it.question, it.reference, it.candidate, it.context);
        out[i] = {it.category, j.ref_score, j.cand_score, j.rationale};
      },
      [](std::size_t) {});
  return out;
}

ordered_json relative_scores_to_json(const RelativeScores& scores, std::span<const JudgedItem> items) {
  ordered_json j;
  ordered_json per = ordered_json::object();
  for (const auto& [c, v] : scores.per_category) per[c] = v;
  j["per_category"] = std::move(per);
  j["overall"] = scores.overall;
  auto list = ordered_json::array();
  for (const auto& it : items) {
    ordered_json e;
    e["category"] = it.category;
    e["ref_score"] = it.ref_score;
    e["cand_score"] = it.cand_score;
    e["rationale"] = it.rationale;
    list.push_back(std::move(e));
  }
  j["items"] = std::move(list);
  return j;
}

}  // namespace vigc
