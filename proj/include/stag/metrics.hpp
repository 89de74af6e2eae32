#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "stag/corpus.hpp"
#include "stag/labelspace.hpp"

namespace stag {

// Exact-match labeled span: maximal B-X (I-X)* run, conlleval-compatible
// repair for I-X without an opener.
struct Span {
    std::string type;
    size_t start = 0;
    size_t end = 0; // inclusive

    auto operator<=>(const Span&) const = default;
};

using ConfusionMatrix = std::vector<std::vector<long>>; // [gold][pred]

// Everything recorded for one (demonstration set, label set, k) run.
struct RunResult {
    std::vector<TaggedSentence> sentences; // evaluated subset, gold tags
    std::vector<std::vector<std::string>> predictions;
    DemonstrationSet demonstrations;
    bool failed = false;
    std::string error;

    double token_accuracy = 0.0;
    double precision = 0.0, recall = 0.0, f1 = 0.0; // BIO tasks
    std::map<std::string, long> per_class_gold;
    std::map<std::string, long> per_class_correct;
    ConfusionMatrix confusion; // over manifest's label classes
    nlohmann::json manifest;
};

double token_accuracy(const std::vector<std::string>& gold,
                      const std::vector<std::string>& pred);

std::vector<Span> extract_spans(const std::vector<std::string>& tags);

struct SpanScores {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

SpanScores span_f1(const std::vector<std::vector<std::string>>& gold,
                   const std::vector<std::vector<std::string>>& pred);

// Span scores restricted to one entity type.
SpanScores span_f1_for_type(const std::vector<std::vector<std::string>>& gold,
                            const std::vector<std::vector<std::string>>& pred,
                            const std::string& type);

struct BaselineScores {
    double overall_majority = 0.0; // task metric (accuracy or span F1)
    double per_word_majority = 0.0;
    std::string overall_majority_tag;
};

// Overall-majority and per-word-majority baselines fit on the train split
// and scored with the task metric on eval (defaults to the full test
// split). Unseen words back off to the overall-majority tag.
BaselineScores majority_baselines(const TaskDataset& dataset);
BaselineScores majority_baselines(const TaskDataset& dataset,
                                  const std::vector<TaggedSentence>& eval);

ConfusionMatrix confusion(const std::vector<std::string>& gold,
                          const std::vector<std::string>& pred,
                          const std::vector<std::string>& classes);

void accumulate_confusion(ConfusionMatrix& into, const ConfusionMatrix& from);

// Row-normalized with the diagonal zeroed (figure display convention).
std::vector<std::vector<double>> display_confusion(const ConfusionMatrix& counts);

struct SpearmanResult {
    double rho = 0.0;
    double p_value = 1.0;
};

// Spearman rank correlation with average ranks and a two-sided
// t-approximation p-value.
SpearmanResult spearman(const std::vector<double>& a, const std::vector<double>& b);

// Pairwise Spearman over the flattened off-diagonal cells of each matrix.
std::vector<std::vector<SpearmanResult>> confusion_spearman(
    const std::vector<ConfusionMatrix>& matrices);

struct SeenUnseen {
    std::optional<double> seen;   // absent when the bucket is empty
    std::optional<double> unseen;
};

// Per-class score split by whether the class was covered by the run's
// demonstrations. Word-level tasks use per-class token accuracy; BIO tasks
// use type-restricted span F1 (classes collapse to their entity type).
std::map<std::string, SeenUnseen> seen_unseen_split(const std::vector<RunResult>& runs,
                                                    const LabelSet& labels);

struct TrueLabelErrors {
    double overall = 0.0; // fraction of erroneous tokens, 0 when error-free
    size_t errors = 0;
    size_t true_label_errors = 0;
    std::map<std::string, double> per_gold_class;
};

// Among shuffled-label errors, the share where the predicted class's
// demonstrated (shuffled) surface equals the gold class's original
// surface, i.e. the model produced the true label instead of the mapped
// one.
TrueLabelErrors true_label_error_fraction(const std::vector<RunResult>& runs,
                                          const LabelSet& shuffled,
                                          const LabelSet& original);

struct AggregateReport {
    size_t runs = 0;
    double mean = 0.0; // task metric over non-failed runs
    double stderr_ = 0.0; // sample stddev / sqrt(runs)
    std::vector<double> per_run;
    std::map<std::string, double> per_class; // accuracy or type F1, averaged
    ConfusionMatrix confusion_total;
    std::vector<std::vector<double>> confusion_display;
    std::vector<std::vector<SpearmanResult>> run_spearman;
    std::vector<std::string> classes;
};

AggregateReport aggregate(const std::vector<RunResult>& runs, const LabelSet& labels,
                          bool bio_metric);

struct LabelSetComparison {
    std::vector<std::string> variants;
    std::vector<std::vector<double>> delta;   // column - row, mean metric
    std::vector<std::vector<SpearmanResult>> rho; // over per-class scores
};

LabelSetComparison label_set_comparison(
    const std::vector<std::pair<std::string, AggregateReport>>& reports);

} // namespace stag
